#include "asmk/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <iostream>
#include <string_view>
#include <thread>

namespace asmk {

namespace {

std::atomic<unsigned> g_max_threads{0};

LogLevel parse_level(const char* value)
{
    if (value == nullptr) return LogLevel::warn;
    std::string_view v(value);
    if (v == "error") return LogLevel::error;
    if (v == "info") return LogLevel::info;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::warn;
}

}  // namespace

void set_max_threads(unsigned n) { g_max_threads.store(n); }

unsigned max_threads()
{
    unsigned n = g_max_threads.load();
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body)
{
    if (n == 0) return;
    const std::size_t workers = std::min<std::size_t>(max_threads(), n);
    if (workers <= 1) {
        body(0, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, w, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    pool.clear();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

LogLevel log_level()
{
    static const LogLevel level = parse_level(std::getenv("MK_LOG"));
    return level;
}

void log(LogLevel level, const std::string& message)
{
    if (level > log_level()) return;
    static constexpr const char* names[] = {"error", "warn", "info", "debug"};
    std::clog << "[" << names[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace asmk
