#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "xresponse/common.hpp"

namespace xresponse::cli {

namespace {

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnparseableHeader:
        case ErrorCode::NonMonotonicTimestamps:
        case ErrorCode::EmptyFile:
        case ErrorCode::NoQuotes:
        case ErrorCode::InvalidConfig:
        case ErrorCode::InvalidArgument:
        case ErrorCode::CacheFormat:
            return kExitParse;
        case ErrorCode::MissingPairSeries:
        case ErrorCode::MissingSeries:
        case ErrorCode::Io:
            return kExitMissing;
        case ErrorCode::NoTrades:
        case ErrorCode::NoValidSamples:
        case ErrorCode::EmptySector:
        case ErrorCode::DegenerateMax:
        case ErrorCode::DegenerateVariance:
        case ErrorCode::TooFewPoints:
            return kExitDegenerate;
    }
    return 1;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cross-response analysis of trades-and-quotes data", "xresponse"};
    app.require_subcommand(1);

    std::string config_path, output_dir, lags, convention, data_dir, cache_dir, sector_map, symbols;
    int jobs = 0;
    app.add_option("--config", config_path, "key = value run configuration file");
    app.add_option("--jobs", jobs, "worker threads (results do not depend on it)");
    app.add_option("--output-dir", output_dir, "output root");
    app.add_option("--lags", lags, "lag list: \"1,2,60\", \"a:b\" or \"a:b:log[:n]\"");
    app.add_option("--convention", convention, "inc0, exc0 or both");
    app.add_option("--data-dir", data_dir, "raw CSV root (<dir>/<SYMBOL>/<DAY>.trades.csv)");
    app.add_option("--cache-dir", cache_dir, "grid cache root (default <output-dir>/cache)");
    app.add_option("--sector-map", sector_map, "symbol,sector CSV");
    app.add_option("--symbols", symbols, "comma-separated symbol list");

    auto* ingest = app.add_subcommand("ingest", "parse CSVs into per-second grid caches");

    ResponseArgs response_args;
    auto* response = app.add_subcommand("response", "pairwise cross-responses or sign correlators");
    response->add_option("--pair", response_args.pairs, "I:J (repeatable)");
    response->add_flag("--all-pairs", response_args.all_pairs, "every ordered pair i != j");
    response->add_flag("--self", response_args.self, "also (i, i) for every symbol");
    response->add_option("--kind", response_args.kind, "cross_response, sign_correlator or both");

    AverageArgs average_args;
    auto* average = app.add_subcommand("average", "passive and active averages");
    average->add_option("--anchor", average_args.anchors, "anchor symbol (repeatable; default all)");
    average->add_option("--direction", average_args.direction, "passive, active or both");
    average->add_option("--kind", average_args.kind, "cross_response, sign_correlator or both");

    SectorArgs sector_args;
    auto* sector = app.add_subcommand("sector", "averages restricted to one sector");
    sector->add_option("--anchor", sector_args.anchors, "anchor symbol (repeatable; default all)");
    sector->add_option("--sector", sector_args.sectors, "sector label (repeatable; default all)");
    sector->add_option("--direction", sector_args.direction, "passive, active or both");
    sector->add_option("--kind", sector_args.kind, "cross_response or sign_correlator");

    MatrixArgs matrix_args;
    auto* matrix = app.add_subcommand("matrix", "normalized response matrix at fixed lags");
    matrix->add_option("--tau", matrix_args.taus, "lag in seconds (repeatable; default 60)");

    RankArgs rank_args;
    auto* rank = app.add_subcommand("rank", "top-k influencing/influenced stocks");
    rank->add_option("--tau", rank_args.taus, "lag in seconds (repeatable; default 60)");
    rank->add_option("--direction", rank_args.direction, "passive, active or both");
    rank->add_option("--k", rank_args.k, "number of rows (default 15)");
    rank->add_flag("--abs", rank_args.by_abs, "rank by magnitude");
    rank->add_option("--kind", rank_args.kind, "cross_response or sign_correlator");

    FitArgs fit_args;
    auto* fit = app.add_subcommand("fit", "power-law fits of averaged correlators");
    fit->add_option("--anchor", fit_args.anchors, "anchor symbol (repeatable; default all)");
    fit->add_option("--pair", fit_args.pairs, "fit a stored pair series I:J instead (repeatable)");
    fit->add_option("--direction", fit_args.direction, "passive, active or both");
    fit->add_option("--kind", fit_args.kind, "sign_correlator (default) or cross_response");
    fit->add_option("--fit-range", fit_args.range, "lo:hi lag range (default all lags)");
    fit->add_option("--chi2", fit_args.chi2, "mean or sum of squared residuals");

    CorrArgs corr_args;
    auto* corr = app.add_subcommand("corr", "correlate active response with trading activity");
    corr->add_option("--tau", corr_args.taus, "lag in seconds (repeatable; default 60)");

    SynthArgs synth_args;
    std::uint64_t seed = 0;
    int n_stocks = 0, n_days = 0;
    auto* synth = app.add_subcommand("synth", "write a synthetic market to --data-dir");
    auto* seed_opt = synth->add_option("--seed", seed, "RNG seed");
    auto* stocks_opt = synth->add_option("--n-stocks", n_stocks, "number of stocks");
    auto* days_opt = synth->add_option("--n-days", n_days, "number of days");

    auto* validate = app.add_subcommand("validate", "check the zero-sign scaling identities");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitParse;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg.load_file(config_path);
        if (jobs != 0) cfg.jobs = jobs;
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        if (!lags.empty()) cfg.lags = lags;
        if (!convention.empty()) cfg.convention = convention;
        if (!data_dir.empty()) cfg.data_dir = data_dir;
        if (!cache_dir.empty()) cfg.cache_dir = cache_dir;
        if (!sector_map.empty()) cfg.sector_map = sector_map;
        if (!symbols.empty()) cfg.symbols = RunConfig::split_symbols(symbols);
        cfg.validate();

        if (*seed_opt) synth_args.seed = seed;
        if (*stocks_opt) synth_args.n_stocks = n_stocks;
        if (*days_opt) synth_args.n_days = n_days;

        if (ingest->parsed()) cmd_ingest(cfg, out, err);
        if (response->parsed()) cmd_response(cfg, response_args, out);
        if (average->parsed()) cmd_average(cfg, average_args, out);
        if (sector->parsed()) cmd_sector(cfg, sector_args, out, err);
        if (matrix->parsed()) cmd_matrix(cfg, matrix_args, out);
        if (rank->parsed()) cmd_rank(cfg, rank_args, out);
        if (fit->parsed()) cmd_fit(cfg, fit_args, out);
        if (corr->parsed()) cmd_corr(cfg, corr_args, out);
        if (synth->parsed()) cmd_synth(cfg, synth_args, out);
        if (validate->parsed()) cmd_validate(cfg, out);
    } catch (const ExitError& e) {
        err << "error: " << e.what() << '\n';
        return e.code;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const nlohmann::json::exception& e) {
        err << "error: malformed JSON input: " << e.what() << '\n';
        return kExitParse;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitMissing;
    }
    return 0;
}

}  // namespace xresponse::cli

int main(int argc, char** argv) { return xresponse::cli::run(argc, argv, std::cout, std::cerr); }
