#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "xresponse/xresponse.hpp"

namespace xresponse::cli {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

void write_file(const fs::path& path, const std::string& bytes) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ExitError(kExitMissing, "missing input " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json with_config(json meta, const RunConfig& cfg) {
    meta["config"] = cfg.to_json();
    return meta;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::vector<std::string> subdirectories(const fs::path& dir) {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory()) out.push_back(e.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

/// Files in `dir` ending with `suffix`, sorted by name.
std::vector<fs::path> files_with_suffix(const fs::path& dir, const std::string& suffix) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
            out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string strip_suffix(const std::string& name, const std::string& suffix) {
    return name.substr(0, name.size() - suffix.size());
}

std::vector<Direction> directions(const std::string& s) {
    if (s == "both") return {Direction::passive, Direction::active};
    return {parse_direction(s)};
}

std::vector<SeriesKind> kinds(const std::string& s) {
    if (s == "both") return {SeriesKind::cross_response, SeriesKind::sign_correlator};
    const auto k = parse_series_kind(s);
    if (k == SeriesKind::self_response) return {SeriesKind::cross_response};
    return {k};
}

std::pair<std::string, std::string> parse_pair(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == s.size())
        throw Error(ErrorCode::InvalidArgument, "pair must look like I:J, got '" + s + "'");
    return {s.substr(0, colon), s.substr(colon + 1)};
}

// ---------------------------------------------------------------------------
// Grid cache
// ---------------------------------------------------------------------------

fs::path grid_path(const RunConfig& cfg, const std::string& sym, const Day& day) {
    return cfg.cache() / sym / (day.str() + ".grid");
}

/// All cached grids of one symbol, in day order.
std::vector<SecondGrid> load_grids(const RunConfig& cfg, const std::string& sym) {
    const auto dir = cfg.cache() / sym;
    if (!fs::is_directory(dir)) throw ExitError(kExitMissing, "no grid cache for " + sym + " at " + dir.string());
    std::vector<SecondGrid> grids;
    for (const auto& p : files_with_suffix(dir, ".grid")) {
        const Day day(strip_suffix(p.filename().string(), ".grid"));
        grids.push_back(decode_grid(read_file(p), sym, day));
    }
    if (grids.empty()) throw ExitError(kExitMissing, "no grid cache for " + sym + " at " + dir.string());
    return grids;
}

bool traded(const SecondGrid& g) {
    return std::any_of(g.n_trades.begin(), g.n_trades.end(), [](std::uint16_t n) { return n > 0; });
}

/// Symbols to work on: the configured list, else everything in the cache.
std::vector<std::string> universe(const RunConfig& cfg) {
    if (!cfg.symbols.empty()) {
        auto s = cfg.symbols;
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
        return s;
    }
    if (!fs::is_directory(cfg.cache()))
        throw ExitError(kExitMissing, "no grid cache at " + cfg.cache().string() + "; run ingest first");
    auto s = subdirectories(cfg.cache());
    if (s.empty()) throw ExitError(kExitMissing, "grid cache " + cfg.cache().string() + " is empty");
    return s;
}

using GridSet = std::map<std::string, std::vector<SecondGrid>>;

GridSet load_universe(const RunConfig& cfg, const std::set<std::string>& symbols) {
    std::vector<std::string> list(symbols.begin(), symbols.end());
    std::vector<std::vector<SecondGrid>> slots(list.size());
    parallel_for(list.size(), cfg.jobs, [&](std::size_t k) { slots[k] = load_grids(cfg, list[k]); });
    GridSet out;
    for (std::size_t k = 0; k < list.size(); ++k) out.emplace(list[k], std::move(slots[k]));
    return out;
}

/// Grids of i and j restricted to the days both traded, aligned by day.
std::pair<std::vector<SecondGrid>, std::vector<SecondGrid>> common_grids(const GridSet& grids, const std::string& i,
                                                                         const std::string& j) {
    std::map<std::string, Calendar> cal;
    std::map<Day, const SecondGrid*> by_day_i, by_day_j;
    for (const auto& g : grids.at(i))
        if (traded(g)) {
            cal[i].insert(g.day);
            by_day_i[g.day] = &g;
        }
    for (const auto& g : grids.at(j))
        if (traded(g)) {
            cal[j].insert(g.day);
            by_day_j[g.day] = &g;
        }
    cal.try_emplace(i);
    cal.try_emplace(j);
    std::pair<std::vector<SecondGrid>, std::vector<SecondGrid>> out;
    for (const auto& d : common_days(cal, {i, j})) {
        out.first.push_back(*by_day_i.at(d));
        out.second.push_back(*by_day_j.at(d));
    }
    if (out.first.empty())
        throw Error(ErrorCode::NoValidSamples, "no common trading day for " + i + " and " + j);
    return out;
}

// ---------------------------------------------------------------------------
// Series store on disk
// ---------------------------------------------------------------------------

fs::path series_dir(const RunConfig& cfg, SeriesKind family, Convention conv) {
    return cfg.output_dir / "series" / to_string(family) / to_string(conv);
}

SeriesKind family_of(SeriesKind k) { return k == SeriesKind::self_response ? SeriesKind::cross_response : k; }

void write_series(const RunConfig& cfg, const ResponseSeries& s) {
    const auto base = series_dir(cfg, family_of(s.kind), s.convention) / (s.i + "__" + s.j);
    std::ostringstream csv;
    write_series_csv(csv, s);
    write_file(base.string() + ".csv", csv.str());
    write_file(base.string() + ".json", dump(with_config(series_metadata(s), cfg)));
}

ResponseSeries read_series(const fs::path& json_path) {
    const auto meta = json::parse(read_file(json_path));
    auto csv_path = json_path;
    csv_path.replace_extension(".csv");
    std::istringstream csv(read_file(csv_path));
    return series_from(meta, read_series_csv(csv));
}

/// Loads every stored pair series of the given families and conventions.
SeriesStore load_store(const RunConfig& cfg, const std::vector<SeriesKind>& families,
                       const std::vector<Convention>& convs) {
    SeriesStore store;
    for (const auto k : families)
        for (const auto c : convs)
            for (const auto& p : files_with_suffix(series_dir(cfg, k, c), ".json")) store.put(read_series(p));
    return store;
}

// ---------------------------------------------------------------------------
// Sector map
// ---------------------------------------------------------------------------

std::optional<SectorMap> load_sectors(const RunConfig& cfg, const std::vector<std::string>& restrict_to) {
    if (cfg.sector_map.empty()) return std::nullopt;
    std::ifstream in(cfg.sector_map);
    if (!in) throw ExitError(kExitMissing, "cannot open sector map " + cfg.sector_map.string());
    const auto full = SectorMap::parse(in);
    SectorMap m;
    const std::set<std::string> keep(restrict_to.begin(), restrict_to.end());
    for (const auto& s : full.symbols())
        if (keep.count(s) != 0) m.add(s, full.sector_of(s));
    return m;
}

std::string sector_of_or_empty(const std::optional<SectorMap>& m, const std::string& sym) {
    return m && m->contains(sym) ? m->sector_of(sym) : std::string{};
}

void write_average(const RunConfig& cfg, const AverageSeries& a, const fs::path& base) {
    std::ostringstream csv;
    write_average_csv(csv, a);
    write_file(base.string() + ".csv", csv.str());
    write_file(base.string() + ".json", dump(with_config(average_metadata(a), cfg)));
}

}  // namespace

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

void cmd_ingest(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    if (!fs::is_directory(cfg.data_dir))
        throw ExitError(kExitParse, "data directory not found: " + cfg.data_dir.string());
    const auto window = SessionWindow::from_env();
    const auto symbols = cfg.symbols.empty() ? subdirectories(cfg.data_dir) : cfg.symbols;
    if (symbols.empty()) throw ExitError(kExitParse, "no symbol directories in " + cfg.data_dir.string());

    struct Task {
        std::string symbol;
        Day day;
        fs::path trades, quotes;
    };
    struct Outcome {
        ParseReport report;
        std::string failure;
        bool has_trades = false;
    };
    std::vector<Task> tasks;
    for (const auto& sym : symbols) {
        const auto dir = cfg.data_dir / sym;
        if (!fs::is_directory(dir)) throw ExitError(kExitParse, "symbol directory not found: " + dir.string());
        for (const auto& p : files_with_suffix(dir, ".trades.csv")) {
            Task t{sym, Day(strip_suffix(p.filename().string(), ".trades.csv")), p, {}};
            t.quotes = dir / (t.day.str() + ".quotes.csv");
            tasks.push_back(std::move(t));
        }
    }

    std::vector<Outcome> outcomes(tasks.size());
    parallel_for(tasks.size(), cfg.jobs, [&](std::size_t k) {
        const auto& t = tasks[k];
        auto& o = outcomes[k];
        try {
            std::ifstream tin(t.trades, std::ios::binary), qin(t.quotes, std::ios::binary);
            if (!qin) throw Error(ErrorCode::Io, "missing quotes file " + t.quotes.string());
            auto parsed = parse_ticks(tin, qin, t.symbol, t.day, window);
            o.report = parsed.report;
            o.has_trades = !parsed.table.trades.empty();
            write_file(grid_path(cfg, t.symbol, t.day), encode_grid(build_grid(parsed.table)));
        } catch (const Error& e) {
            o.failure = t.trades.string() + ": " + e.what();
        }
    });

    json report = json::object();
    int failures = 0;
    std::size_t k = 0;
    for (const auto& sym : symbols) {
        FileReport tr, qr;
        int days = 0, traded_days = 0;
        for (; k < tasks.size() && tasks[k].symbol == sym; ++k) {
            const auto& o = outcomes[k];
            if (!o.failure.empty()) {
                err << "error: " << o.failure << '\n';
                ++failures;
                continue;
            }
            for (const auto& d : o.report.trades.diagnostics) err << tasks[k].trades.string() << ": " << d << '\n';
            for (const auto& d : o.report.quotes.diagnostics) err << tasks[k].quotes.string() << ": " << d << '\n';
            auto add = [](FileReport& a, const FileReport& b) {
                a.lines_in += b.lines_in;
                a.retained += b.retained;
                a.dropped_window += b.dropped_window;
                a.malformed += b.malformed;
                a.crossed += b.crossed;
            };
            add(tr, o.report.trades);
            add(qr, o.report.quotes);
            ++days;
            traded_days += o.has_trades ? 1 : 0;
        }
        const bool ok = tr.conserved() && qr.conserved();
        out << sym << " days=" << days << " traded_days=" << traded_days << " trades: in=" << tr.lines_in
            << " kept=" << tr.retained << " window=" << tr.dropped_window << " malformed=" << tr.malformed
            << " | quotes: in=" << qr.lines_in << " kept=" << qr.retained << " window=" << qr.dropped_window
            << " malformed=" << qr.malformed << " crossed=" << qr.crossed << (ok ? " [conserved]" : " [MISMATCH]")
            << '\n';
        auto file_json = [](const FileReport& r) {
            return json{{"lines_in", r.lines_in},
                        {"retained", r.retained},
                        {"dropped_window", r.dropped_window},
                        {"malformed", r.malformed},
                        {"crossed", r.crossed}};
        };
        report[sym] = json{{"days", days},
                           {"traded_days", traded_days},
                           {"trades", file_json(tr)},
                           {"quotes", file_json(qr)},
                           {"conserved", ok}};
    }
    write_file(cfg.output_dir / "ingest_report.json",
               dump(with_config(json{{"session", window.to_string()}, {"symbols", report}}, cfg)));
    if (failures > 0) throw ExitError(kExitParse, std::to_string(failures) + " file(s) failed to parse");
}

// ---------------------------------------------------------------------------
// response
// ---------------------------------------------------------------------------

void cmd_response(const RunConfig& cfg, const ResponseArgs& args, std::ostream& out) {
    const auto lags = cfg.lag_spec();
    const auto convs = cfg.conventions();
    const auto kind_list = kinds(args.kind);

    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& p : args.pairs) pairs.push_back(parse_pair(p));
    const auto syms = (args.all_pairs || args.self) ? universe(cfg) : std::vector<std::string>{};
    if (args.all_pairs)
        for (const auto& i : syms)
            for (const auto& j : syms)
                if (i != j) pairs.emplace_back(i, j);
    if (args.self)
        for (const auto& s : syms) pairs.emplace_back(s, s);
    if (pairs.empty()) throw Error(ErrorCode::InvalidArgument, "no pairs given; use --pair, --all-pairs or --self");
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

    std::set<std::string> needed;
    for (const auto& [i, j] : pairs) {
        needed.insert(i);
        needed.insert(j);
    }
    const auto grids = load_universe(cfg, needed);

    // One task per (pair, kind); each task writes its own files.
    struct Task {
        std::string i, j;
        SeriesKind kind;
    };
    std::vector<Task> tasks;
    for (const auto& [i, j] : pairs)
        for (const auto k : kind_list) tasks.push_back({i, j, k});
    parallel_for(tasks.size(), cfg.jobs, [&](std::size_t k) {
        const auto& t = tasks[k];
        const auto [gi, gj] = common_grids(grids, t.i, t.j);
        const auto pair = t.kind == SeriesKind::sign_correlator ? correlator_pair(gi, gj, lags)
                                                                  : response_pair(gi, gj, lags);
        for (const auto c : convs) write_series(cfg, pair.get(c));
    });
    out << "wrote " << tasks.size() * convs.size() << " series for " << pairs.size() << " pair(s)\n";
}

// ---------------------------------------------------------------------------
// average / sector
// ---------------------------------------------------------------------------

void cmd_average(const RunConfig& cfg, const AverageArgs& args, std::ostream& out) {
    const auto syms = universe(cfg);
    const std::set<std::string> partners(syms.begin(), syms.end());
    const auto anchors = args.anchors.empty() ? syms : args.anchors;
    const auto kind_list = kinds(args.kind);
    const auto store = load_store(cfg, kind_list, cfg.conventions());
    int written = 0;
    for (const auto kind : kind_list)
        for (const auto c : cfg.conventions())
            for (const auto d : directions(args.direction))
                for (const auto& a : anchors) {
                    const auto avg = average_series(kind, d, a, partners, c, store);
                    write_average(cfg, avg,
                                  cfg.output_dir / "averages" / to_string(kind) / to_string(c) / to_string(d) / a);
                    ++written;
                }
    out << "wrote " << written << " average series\n";
}

void cmd_sector(const RunConfig& cfg, const SectorArgs& args, std::ostream& out, std::ostream& err) {
    const auto syms = universe(cfg);
    const auto sectors = load_sectors(cfg, syms);
    if (!sectors) throw ExitError(kExitMissing, "sector command needs --sector-map");
    const auto anchors = args.anchors.empty() ? syms : args.anchors;
    const auto sector_list = args.sectors.empty() ? sectors->sectors() : args.sectors;
    const auto kind_list = kinds(args.kind);
    const auto store = load_store(cfg, kind_list, cfg.conventions());
    int written = 0;
    for (const auto kind : kind_list)
        for (const auto c : cfg.conventions())
            for (const auto d : directions(args.direction))
                for (const auto& a : anchors)
                    for (const auto& sec : sector_list) {
                        AverageSeries avg;
                        try {
                            avg = sector_average(a, d, sec, *sectors, c, store, kind);
                        } catch (const Error& e) {
                            if (e.code() != ErrorCode::EmptySector || !args.sectors.empty()) throw;
                            err << "skip: " << e.what() << '\n';
                            continue;
                        }
                        auto meta = average_metadata(avg);
                        meta["sector"] = sec;
                        const auto base = cfg.output_dir / "sectors" / to_string(kind) / to_string(c) /
                                          to_string(d) / (a + "__" + sec);
                        std::ostringstream csv;
                        write_average_csv(csv, avg);
                        write_file(base.string() + ".csv", csv.str());
                        write_file(base.string() + ".json", dump(with_config(meta, cfg)));
                        ++written;
                    }
    out << "wrote " << written << " sector average series\n";
}

// ---------------------------------------------------------------------------
// matrix / rank / corr
// ---------------------------------------------------------------------------

void cmd_matrix(const RunConfig& cfg, const MatrixArgs& args, std::ostream& out) {
    const auto syms = universe(cfg);
    const auto sectors = load_sectors(cfg, syms);
    const auto store = load_store(cfg, {SeriesKind::cross_response}, cfg.conventions());
    for (const auto c : cfg.conventions())
        for (const int tau : args.taus) {
            const auto m = response_matrix(syms, tau, c, store, sectors ? &*sectors : nullptr);
            const auto base = cfg.output_dir / "matrix" / to_string(c) / ("tau_" + std::to_string(tau));
            std::ostringstream csv;
            write_matrix_csv(csv, m);
            write_file(base.string() + ".csv", csv.str());
            write_file(base.string() + ".json", dump(with_config(matrix_metadata(m), cfg)));
            out << "matrix " << to_string(c) << " tau=" << tau << " n=" << m.size()
                << " max_abs=" << format_double(m.max_abs) << '\n';
        }
}

void cmd_rank(const RunConfig& cfg, const RankArgs& args, std::ostream& out) {
    const auto syms = universe(cfg);
    const std::set<std::string> set(syms.begin(), syms.end());
    const auto sectors = load_sectors(cfg, syms);
    const auto kind = kinds(args.kind).front();
    const auto store = load_store(cfg, {kind}, cfg.conventions());
    for (const auto c : cfg.conventions())
        for (const auto d : directions(args.direction))
            for (const int tau : args.taus) {
                const auto r = rank_stocks(d, tau, c, args.k, set, store, args.by_abs, kind);
                const auto base = cfg.output_dir / "rank" / to_string(c) /
                                  (std::string(to_string(d)) + "_tau_" + std::to_string(tau));
                std::ostringstream csv;
                write_ranking_csv(csv, r, sectors ? &*sectors : nullptr);
                write_file(base.string() + ".csv", csv.str());
                json entries = json::array();
                for (const auto& e : r.entries)
                    entries.push_back({{"symbol", e.symbol}, {"value", e.value},
                                       {"sector", sector_of_or_empty(sectors, e.symbol)}});
                const json meta{{"direction", to_string(d)}, {"tau", tau},        {"convention", to_string(c)},
                                {"kind", to_string(kind)},   {"k", args.k},       {"by_abs", args.by_abs},
                                {"entries", entries}};
                write_file(base.string() + ".json", dump(with_config(meta, cfg)));
                out << "rank " << to_string(c) << ' ' << to_string(d) << " tau=" << tau << ':';
                for (const auto& e : r.entries) out << ' ' << e.symbol;
                out << '\n';
            }
}

void cmd_corr(const RunConfig& cfg, const CorrArgs& args, std::ostream& out) {
    const auto syms = universe(cfg);
    const std::set<std::string> set(syms.begin(), syms.end());
    const auto grids = load_universe(cfg, set);
    std::map<std::string, ActivityStats> activity;
    for (const auto& [sym, gs] : grids) {
        std::vector<SecondGrid> traded_days;
        for (const auto& g : gs)
            if (traded(g)) traded_days.push_back(g);
        if (traded_days.empty()) throw Error(ErrorCode::NoTrades, sym + " never traded");
        activity[sym] = activity_stats(traded_days);
    }
    const auto store = load_store(cfg, {SeriesKind::cross_response}, cfg.conventions());
    for (const auto c : cfg.conventions())
        for (const int tau : args.taus) {
            std::map<std::string, double> active;
            json points = json::array();
            for (const auto& s : syms) {
                const auto avg = active_average(s, set, c, store);
                const auto* p = avg.at(tau);
                if (p == nullptr)
                    throw Error(ErrorCode::MissingSeries,
                                "active average of " + s + " has no value at tau=" + std::to_string(tau));
                active[s] = p->value;
                points.push_back({{"symbol", s},
                                  {"active", p->value},
                                  {"avg_daily_trades", activity.at(s).avg_daily_trades},
                                  {"f", activity.at(s).f}});
            }
            const double r = trade_count_correlation(active, activity);
            const json meta{{"tau", tau}, {"convention", to_string(c)}, {"correlation", r},
                            {"n_symbols", syms.size()}, {"points", points}};
            write_file(cfg.output_dir / "corr" / (std::string(to_string(c)) + "_tau_" + std::to_string(tau) + ".json"),
                       dump(with_config(meta, cfg)));
            out << "corr " << to_string(c) << " tau=" << tau << " r=" << format_double(r) << '\n';
        }
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

void cmd_fit(const RunConfig& cfg, const FitArgs& args, std::ostream& out) {
    FitOptions opt;
    opt.chi2 = parse_chi2_mode(args.chi2);
    int lo = 0, hi = std::numeric_limits<int>::max();
    if (!args.range.empty()) {
        const auto parts = split(args.range, ':');
        if (parts.size() != 2 || !parse_int(parts[0], lo) || !parse_int(parts[1], hi) || hi < lo)
            throw Error(ErrorCode::InvalidArgument, "fit range must be lo:hi, got '" + args.range + "'");
    }
    const auto kind = kinds(args.kind).front();
    const auto convs = cfg.conventions();
    const auto store = load_store(cfg, {kind}, convs);
    auto fit_json = [&](const PowerLawFit& f, int lo_, int hi_) {
        auto j = to_json(f);
        j["range"] = {lo_, hi_ == std::numeric_limits<int>::max() ? -1 : hi_};
        return j;
    };

    // Pairwise series.
    for (const auto& p : args.pairs) {
        const auto [i, j] = parse_pair(p);
        json fits = json::object();
        for (const auto c : convs) {
            const auto* s = store.find(kind, c, i, j);
            if (s == nullptr)
                throw Error(ErrorCode::MissingPairSeries, std::string(to_string(kind)) + "/" + to_string(c) +
                                                              " missing: " + i + "->" + j);
            const auto f = fit_power_law(*s, lo, hi, opt);
            fits[to_string(c)] = fit_json(f, lo, hi);
            out << "fit " << i << "->" << j << ' ' << to_string(c) << " theta=" << format_double(f.theta)
                << " tau0=" << format_double(f.tau0) << " gamma=" << format_double(f.gamma)
                << " converged=" << (f.converged ? "true" : "false") << '\n';
        }
        const json meta{{"kind", to_string(kind)}, {"i", i}, {"j", j}, {"fits", fits}};
        write_file(cfg.output_dir / "fits" / to_string(kind) / "pairs" / (i + "__" + j + ".json"),
                   dump(with_config(meta, cfg)));
    }
    if (!args.pairs.empty() && args.anchors.empty()) return;

    // Passive/active averages.
    const auto syms = universe(cfg);
    const std::set<std::string> partners(syms.begin(), syms.end());
    const auto anchors = args.anchors.empty() ? syms : args.anchors;
    std::ostringstream table;
    write_fit_table_header(table);
    const bool both = convs.size() == 2;
    for (const auto d : directions(args.direction))
        for (const auto& a : anchors) {
            json fits = json::object();
            std::map<Convention, PowerLawFit> by_conv;
            for (const auto c : convs) {
                const auto avg = average_series(kind, d, a, partners, c, store);
                by_conv[c] = fit_power_law(avg, lo, hi, opt);
                fits[to_string(c)] = fit_json(by_conv[c], lo, hi);
            }
            const json meta{{"kind", to_string(kind)}, {"direction", to_string(d)}, {"anchor", a},
                            {"fits", fits}};
            write_file(cfg.output_dir / "fits" / to_string(kind) / to_string(d) / (a + ".json"),
                       dump(with_config(meta, cfg)));
            if (both)
                write_fit_table_row(table, d, a, by_conv.at(Convention::include_zeros),
                                    by_conv.at(Convention::exclude_zeros));
            out << "fit " << to_string(d) << ' ' << a;
            for (const auto& [c, f] : by_conv)
                out << ' ' << to_string(c) << "(gamma=" << format_double(f.gamma) << ", "
                    << to_string(f.memory_class()) << ", converged=" << (f.converged ? "true" : "false") << ')';
            out << '\n';
        }
    if (both) write_file(cfg.output_dir / "fits" / to_string(kind) / "table.csv", table.str());
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

void cmd_synth(const RunConfig& cfg, const SynthArgs& args, std::ostream& out) {
    auto sc = SynthConfig::from(cfg.file);
    if (args.n_stocks && *args.n_stocks != sc.n_stocks) {
        // Per-stock defaults depend on the universe size; rebuild them.
        if (cfg.file.has("trade_prob") || cfg.file.has("persist_prob") || cfg.file.has("impact"))
            throw Error(ErrorCode::InvalidConfig, "--n-stocks conflicts with per-stock arrays in the config file");
        sc.n_stocks = *args.n_stocks;
        sc.trade_prob.clear();
        sc.persist_prob.clear();
        sc.impact.clear();
        sc.fill_defaults();
    }
    if (args.n_days) sc.n_days = *args.n_days;
    if (args.seed) sc.seed = *args.seed;
    sc.validate();
    const auto market = generate(sc);
    const auto manifest = write_market(market, sc, cfg.data_dir);
    out << "wrote " << manifest.at("files").size() << " files for " << market.symbols.size() << " stocks x "
        << market.days.size() << " days to " << cfg.data_dir.string() << "; config_hash "
        << manifest.at("config_hash").get<std::string>() << '\n';
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

namespace {

double rel_dev(double lhs, double rhs, double scale = 0.0) {
    return std::abs(lhs - rhs) / std::max({std::abs(lhs), scale, 1e-15});
}

struct Check {
    explicit Check(std::string n) : name(std::move(n)) {}

    std::string name;
    double max_dev = 0.0;
    std::string worst;
    std::size_t n = 0;

    void add(double dev, const std::string& where) {
        ++n;
        if (worst.empty() || dev > max_dev || std::isnan(dev)) {
            max_dev = std::isnan(dev) ? std::numeric_limits<double>::infinity() : dev;
            worst = where;
        }
    }
};

/// f_ij(tau) times R^exc_ij(tau), or nothing if the pair has no inc point.
std::optional<double> scaled_exc(const ResponseSeries& inc, const ResponseSeries& exc, int tau) {
    const auto f = windowed_frequency(inc, exc, tau);
    if (!f) return std::nullopt;
    const auto* e = exc.at(tau);
    return e == nullptr ? 0.0 : *f * e->value;
}

}  // namespace

void cmd_validate(const RunConfig& cfg, std::ostream& out) {
    constexpr double kTolerance = 1e-9;
    const std::vector<SeriesKind> families{SeriesKind::cross_response, SeriesKind::sign_correlator};
    const auto store = load_store(cfg, families, {Convention::include_zeros, Convention::exclude_zeros});

    Check pair_check{"pair inc = f * exc"};
    for (const auto* inc : store.all()) {
        if (inc->convention != Convention::include_zeros) continue;
        const auto* exc = store.find(inc->kind, Convention::exclude_zeros, inc->i, inc->j);
        if (exc == nullptr) continue;
        for (const auto& [tau, p] : inc->points) {
            const auto rhs = scaled_exc(*inc, *exc, tau);
            pair_check.add(rel_dev(p.value, *rhs), std::string(to_string(family_of(inc->kind))) + " " + inc->i +
                                                       "->" + inc->j + " tau=" + std::to_string(tau));
        }
    }

    Check passive_check{"passive inc = mean f * exc"};
    Check active_check{"active inc = f * active exc"};
    for (const auto fam : families) {
        for (const auto d : {Direction::passive, Direction::active}) {
            const auto dir = cfg.output_dir / "averages" / to_string(fam) / "inc0" / to_string(d);
            for (const auto& meta_path : files_with_suffix(dir, ".json")) {
                const auto meta = json::parse(read_file(meta_path));
                const auto anchor = meta.at("anchor").get<std::string>();
                const auto partners = meta.at("universe").get<std::vector<std::string>>();
                auto csv_path = meta_path;
                csv_path.replace_extension(".csv");
                std::istringstream csv(read_file(csv_path));
                const auto stored = read_average_csv(csv);
                std::vector<std::pair<const ResponseSeries*, const ResponseSeries*>> pairs;
                for (const auto& p : partners) {
                    const auto [i, j] = d == Direction::passive ? std::pair{anchor, p} : std::pair{p, anchor};
                    const auto* inc = store.find(fam, Convention::include_zeros, i, j);
                    const auto* exc = store.find(fam, Convention::exclude_zeros, i, j);
                    if (inc == nullptr || exc == nullptr)
                        throw Error(ErrorCode::MissingPairSeries, "average " + meta_path.string() +
                                                                      " refers to missing pair " + i + "->" + j);
                    pairs.emplace_back(inc, exc);
                }
                const std::string where_base =
                    std::string(to_string(fam)) + " " + to_string(d) + " " + anchor + " tau=";
                for (const auto& [tau, point] : stored) {
                    // Weighted form: mean over partners of f_ij * R^exc_ij.
                    // Partner terms can cancel to an exact zero; deviations are
                    // then measured against the mean partner magnitude.
                    CompensatedSum sum, magnitude;
                    std::int64_t n = 0;
                    std::set<std::int64_t> counts_inc, counts_exc;
                    MomentAccumulator exc_acc;
                    for (const auto& [inc, exc] : pairs) {
                        const auto v = scaled_exc(*inc, *exc, tau);
                        if (!v) continue;
                        sum.add(*v);
                        magnitude.add(std::abs(*v));
                        ++n;
                        counts_inc.insert(inc->at(tau)->n_samples);
                        const auto* e = exc->at(tau);
                        counts_exc.insert(e ? e->n_samples : 0);
                        if (e) exc_acc.add(e->value);
                    }
                    if (n == 0) continue;
                    const double weighted = sum.value() / static_cast<double>(n);
                    const double scale = magnitude.value() / static_cast<double>(n);
                    if (d == Direction::passive) {
                        passive_check.add(rel_dev(point.value, weighted, scale), where_base + std::to_string(tau));
                    } else if (counts_inc.size() == 1 && counts_exc.size() == 1 &&
                               exc_acc.count == static_cast<std::int64_t>(n)) {
                        // Common window set: f_j factors out of the mean.
                        const double f = static_cast<double>(*counts_exc.begin()) /
                                         static_cast<double>(*counts_inc.begin());
                        active_check.add(rel_dev(point.value, f * exc_acc.mean(), scale), where_base + std::to_string(tau));
                    } else {
                        active_check.add(rel_dev(point.value, weighted, scale), where_base + std::to_string(tau));
                    }
                }
            }
        }
    }

    const std::vector<const Check*> checks{&pair_check, &passive_check, &active_check};
    std::size_t total = 0;
    for (const auto* c : checks) total += c->n;
    if (total == 0) {
        out << "nothing to validate\n";
        return;
    }
    double max_dev = 0.0;
    const Check* worst = nullptr;
    for (const auto* c : checks) {
        out << c->name << ": " << c->n << " checks, max relative deviation " << format_double(c->max_dev);
        if (c->n > 0) out << " (" << c->worst << ')';
        out << '\n';
        if (c->n > 0 && (worst == nullptr || c->max_dev > max_dev)) {
            max_dev = c->max_dev;
            worst = c;
        }
    }
    out << "max relative deviation " << format_double(max_dev) << '\n';
    if (max_dev > kTolerance)
        throw ExitError(kExitValidation, "identity violated: " + worst->name + " at " + worst->worst +
                                             " (relative deviation " + format_double(max_dev) + ")");
}

}  // namespace xresponse::cli
