#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace asmk::cli {

/// Pipeline defaults for retrieval at full scale.
struct PipelineConfig {
    std::size_t dim = 128;
    std::size_t kappa = 65536;
    double tau = 0.0;
    double alpha = 3.0;
    unsigned smooth = 3;
    std::size_t topn = 1000;
    std::size_t ma_query = 5;
    std::vector<double> scales{0.25, 0.353, 0.5, 0.707, 1.0, 1.414, 2.0};
    std::uint64_t seed = 0;
};

/// Parses and runs one `asmk` invocation. args excludes the program name.
/// Returns the process exit code; diagnostics go to `err`, reports to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace asmk::cli
