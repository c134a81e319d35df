#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "run_config.hpp"

namespace xresponse::cli {

/// Runs task(k) for k in [0, n) on up to `jobs` threads. Results must go to
/// per-task slots; the first failing task (by index) is rethrown.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& task) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < n;) {
            try {
                task(k);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

struct ResponseArgs {
    std::vector<std::string> pairs;
    bool all_pairs = false;
    bool self = false;
    std::string kind = "cross_response";
};

struct AverageArgs {
    std::vector<std::string> anchors;
    std::string direction = "both";
    std::string kind = "cross_response";
};

struct SectorArgs {
    std::vector<std::string> anchors;
    std::vector<std::string> sectors;
    std::string direction = "both";
    std::string kind = "cross_response";
};

struct MatrixArgs {
    std::vector<int> taus{60};
};

struct RankArgs {
    std::vector<int> taus{60};
    std::string direction = "both";
    std::size_t k = 15;
    bool by_abs = false;
    std::string kind = "cross_response";
};

struct FitArgs {
    std::vector<std::string> anchors;
    std::vector<std::string> pairs;
    std::string direction = "both";
    std::string kind = "sign_correlator";
    std::string range;
    std::string chi2 = "mean";
};

struct CorrArgs {
    std::vector<int> taus{60};
};

struct SynthArgs {
    std::optional<std::uint64_t> seed;
    std::optional<int> n_stocks;
    std::optional<int> n_days;
};

void cmd_ingest(const RunConfig& cfg, std::ostream& out, std::ostream& err);
void cmd_response(const RunConfig& cfg, const ResponseArgs& args, std::ostream& out);
void cmd_average(const RunConfig& cfg, const AverageArgs& args, std::ostream& out);
void cmd_sector(const RunConfig& cfg, const SectorArgs& args, std::ostream& out, std::ostream& err);
void cmd_matrix(const RunConfig& cfg, const MatrixArgs& args, std::ostream& out);
void cmd_rank(const RunConfig& cfg, const RankArgs& args, std::ostream& out);
void cmd_fit(const RunConfig& cfg, const FitArgs& args, std::ostream& out);
void cmd_corr(const RunConfig& cfg, const CorrArgs& args, std::ostream& out);
void cmd_synth(const RunConfig& cfg, const SynthArgs& args, std::ostream& out);
void cmd_validate(const RunConfig& cfg, std::ostream& out);

/// Parses argv and dispatches; returns the process exit status.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace xresponse::cli
