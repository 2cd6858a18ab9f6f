#include "idtrace/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "idtrace/bench.hpp"
#include "idtrace/coreset.hpp"
#include "idtrace/digest.hpp"
#include "idtrace/errors.hpp"
#include "idtrace/generator.hpp"
#include "idtrace/json_io.hpp"
#include "idtrace/service.hpp"
#include "idtrace/tracer.hpp"
#include "idtrace/universe.hpp"

namespace idtrace::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct IngestArgs {
    std::string csv;
    std::string out;
};

struct StatsArgs {
    std::string dataset;
    std::string attr;
    std::string format = "json";
};

struct CoresetArgs {
    std::string dataset;
    std::string object;
    std::string known;
    bool enumerate = false;
    std::size_t max_size = 0;
    bool strict = false;
};

struct TraceArgs {
    std::string dataset;
    std::string object;
    std::string known;
    std::string strategy = "titf";
    std::uint64_t seed = 2024;
    bool interactive = false;
    bool literal = false;
    double latency_ms = 0.0;
};

struct BenchArgs {
    std::string config;
    std::string out;
};

struct ServeArgs {
    std::string listen;
    std::string data_dir;
    std::optional<std::size_t> display_threshold;
    std::string static_dir;
};

struct GenerateArgs {
    std::size_t objects = 5000;
    std::size_t attrs = 20;
    std::size_t min_k = 2;
    std::size_t max_k = 12;
    std::string skew = "zipf";
    double zipf_exponent = 1.1;
    std::uint64_t seed = 1990;
    bool no_unique = false;
    std::size_t profiles = 50;
    double fidelity = 0.8;
    std::string out;
    bool index = false;
};

std::shared_ptr<const Universe> load(const std::string& path) {
    return std::make_shared<const Universe>(load_dataset(path));
}

ObjectIndex require_object(const Universe& u, const std::string& id) {
    const auto found = u.find_object(id);
    if (!found) {
        throw ValidationError("object '" + id + "' not in dataset");
    }
    return *found;
}

std::string read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open " + path.string());
    }
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run_ingest(const IngestArgs& a, std::ostream& out) {
    const std::string text = read_all(a.csv);
    const Universe u = parse_csv_text(text);
    save_index(u, a.out);
    out << json{{"out", a.out},
                {"objects", u.object_count()},
                {"attributes", u.attribute_count()},
                {"sha256", sha256_hex(text)}}
               .dump(2)
        << "\n";
    return kExitOk;
}

int run_stats(const StatsArgs& a, std::ostream& out) {
    const auto u = load(a.dataset);
    const auto all = u->all();
    bench::Table table;
    json j;
    if (a.attr.empty()) {
        table.columns = {"attribute", "values", "missing", "avg_bits"};
        json attrs = json::array();
        for (AttributeId id = 0; id < u->attribute_count(); ++id) {
            const auto& attr = u->schema()[id];
            const std::size_t missing = u->missing_mask(id).count();
            std::optional<double> bits;
            try {
                bits = average_discriminability(*u, all, id).value;
            } catch (const UndefinedAttributeError&) {
            }
            attrs.push_back({{"name", attr.name},
                             {"values", attr.values.size()},
                             {"missing", missing},
                             {"avg_bits", bits ? json(*bits) : json(nullptr)}});
            table.rows.push_back({attr.name, std::to_string(attr.values.size()), std::to_string(missing),
                                  bits ? bench::format_number(*bits) : "undefined"});
        }
        j = {{"objects", u->object_count()},
             {"attributes", u->attribute_count()},
             {"identity_entropy", identity_entropy(u->object_count()).value},
             {"attribute_stats", attrs}};
    } else {
        const AttributeId id = u->schema().require(a.attr);
        table.columns = {"value", "count", "bits"};
        json values = json::array();
        for (const auto& [v, count] : value_counts(*u, all, id)) {
            if (v == kMissing) {
                continue;
            }
            const double bits = attribute_discriminability(*u, all, {id, v}).value;
            values.push_back({{"value", u->schema().value_name(id, v)}, {"count", count}, {"bits", bits}});
            table.rows.push_back({u->schema().value_name(id, v), std::to_string(count), bench::format_number(bits)});
        }
        j = {{"attribute", a.attr},
             {"missing", u->missing_mask(id).count()},
             {"avg_bits", average_discriminability(*u, all, id).value},
             {"values", values}};
    }
    if (a.format == "csv") {
        table.write_csv(out);
    } else {
        out << j.dump(2) << "\n";
    }
    return kExitOk;
}

int run_coreset(const CoresetArgs& a, std::ostream& out) {
    const auto u = load(a.dataset);
    const ObjectIndex target = require_object(*u, a.object);
    const ObservationSet known = parse_known(*u, a.known);
    const Minimality minimality = a.strict ? Minimality::strict : Minimality::target;
    if (a.enumerate) {
        const CandidateSet space = apply_observations(*u, u->all(), known);
        if (!space.contains(target)) {
            throw InvalidSetError("known observations exclude the target");
        }
        const std::size_t max_size = a.max_size == 0 ? u->attribute_count() : a.max_size;
        const auto sets = enumerate_core_sets(*u, space, target, max_size, minimality);
        json list = json::array();
        for (const auto& s : sets) {
            json names = json::array();
            for (AttributeId id : s) {
                names.push_back(u->schema()[id].name);
            }
            list.push_back(names);
        }
        out << json{{"target", a.object},
                    {"max_size", max_size},
                    {"minimality", a.strict ? "strict" : "target"},
                    {"count", sets.size()},
                    {"core_sets", list}}
                   .dump(2)
            << "\n";
        return kExitOk;
    }
    auto report = greedy_core_set(*u, u->all(), target, known);
    if (a.strict) {
        const CandidateSet space = apply_observations(*u, u->all(), known);
        report.is_minimal =
            is_core_identification_set(*u, space, target, report.attribute_ids, Minimality::strict).is_minimal;
    }
    json j = to_json(*u, report);
    j["minimality"] = a.strict ? "strict" : "target";
    out << j.dump(2) << "\n";
    return kExitOk;
}

void print_ranking(const Session& s, const Recommendation& rec, std::ostream& err) {
    const Universe& u = s.universe();
    err << "candidates: " << s.candidates().size() << "  entropy: " << s.entropy_history().back().value
        << " bits\n";
    const std::size_t shown = std::min<std::size_t>(rec.ranking.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) {
        const auto& r = rec.ranking[i];
        err << "  " << (i + 1) << ". " << u.schema()[r.attribute].name << "  " << r.bits.value << " bits  [";
        bool first = true;
        for (const auto& [v, o] : s.whatif(r.attribute)) {
            err << (first ? "" : " ") << u.schema().value_name(r.attribute, v) << ":" << o.count;
            first = false;
        }
        err << "]\n";
    }
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

int run_interactive(const TraceArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
    const auto u = load(a.dataset);
    Session s(u, parse_known(*u, a.known));
    while (s.status() == SessionStatus::active) {
        Recommendation rec;
        try {
            rec = s.recommend();
        } catch (const ExhaustedError&) {
            s.conclude_ambiguous();
            break;
        }
        print_ranking(s, rec, err);
        const std::string chosen = u->schema()[rec.chosen].name;
        err << "value for " << chosen << " (or attr=value, '-' if unavailable, 'q' to stop)> " << std::flush;
        std::string line;
        if (!std::getline(in, line)) {
            break;
        }
        line = trim(line);
        if (line == "q") {
            break;
        }
        try {
            if (line == "-") {
                s.mark_unavailable(rec.chosen);
            } else if (line.find('=') != std::string::npos) {
                const auto parsed = parse_known(*u, line);
                if (parsed.size() != 1) {
                    throw ValidationError("enter one observation at a time");
                }
                s.observe(*parsed.begin());
            } else {
                s.observe({rec.chosen, u->schema().require_value(rec.chosen, line)});
            }
        } catch (const ValidationError& e) {
            err << "  " << e.what() << "\n";
        } catch (const UsageError& e) {
            err << "  " << e.what() << "\n";
        }
    }

    json path = json::array();
    for (const auto& o : s.path()) {
        path.push_back(observation_json(*u, o));
    }
    json history = json::array();
    for (Bits b : s.entropy_history()) {
        history.push_back(b.value);
    }
    json unavailable = json::array();
    for (AttributeId id : s.unavailable()) {
        unavailable.push_back(u->schema()[id].name);
    }
    json survivors = json::array();
    for (ObjectIndex i : s.candidates().members()) {
        survivors.push_back(u->object_id(i));
    }
    json j = {{"strategy", "interactive"},
              {"status", to_string(s.status())},
              {"acquisitions", s.path().size()},
              {"path", path},
              {"entropy_history", history},
              {"unavailable", unavailable}};
    j["target_found"] = s.status() == SessionStatus::identified ? survivors.front() : survivors;
    out << j.dump(2) << "\n";
    return kExitOk;
}

int run_trace(const TraceArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
    const auto strategy = parse_strategy(a.strategy);
    if (!strategy) {
        throw UsageError("strategy must be 'titf' or 'random'");
    }
    if (a.interactive) {
        return run_interactive(a, in, out, err);
    }
    if (a.object.empty()) {
        throw UsageError("--object is required unless --interactive");
    }
    const auto u = load(a.dataset);
    const ObjectIndex target = require_object(*u, a.object);
    const ObservationSet known = parse_known(*u, a.known);
    TraceOptions options;
    options.literal_loop = a.literal;
    options.latency.fixed = std::chrono::nanoseconds(static_cast<long long>(a.latency_ms * 1e6));
    const TraceResult result = *strategy == Strategy::titf ? run_titf(u, target, known, options)
                                                           : run_random_baseline(u, target, known, a.seed, options);
    json j = to_json(*u, result);
    if (*strategy == Strategy::random) {
        j["seed"] = a.seed;
    }
    out << j.dump(2) << "\n";
    return kExitOk;
}

int run_bench_cmd(const BenchArgs& a, std::ostream& out, std::ostream& err) {
    const fs::path config_path(a.config);
    json config_json;
    try {
        config_json = json::parse(read_all(config_path));
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("bench config: ") + e.what());
    }
    const auto config = bench::parse_bench_config(config_json, config_path.parent_path());
    err << "seed: " << config.seed << "\n";
    const auto report = bench::run_bench(config, a.out);
    json files = json::array();
    for (const auto& f : report.files) {
        files.push_back(f.string());
    }
    json j = {{"out", a.out}, {"seed", config.seed}, {"files", files}};
    if (report.efficiency) {
        const auto& p = report.efficiency->pooled;
        j["q4"] = {{"titf_mean_acquisitions", p.titf_mean_acquisitions},
                   {"random_mean_acquisitions", p.random_mean_acquisitions},
                   {"acquisition_reduction_pct", p.acquisition_reduction_pct},
                   {"time_reduction_pct", p.time_reduction_pct}};
    }
    out << j.dump(2) << "\n";
    return kExitOk;
}

int run_serve(const ServeArgs& a, std::ostream& out) {
    service::ServiceConfig config;
    config.apply_env();
    if (!a.listen.empty()) {
        config.set_listen(a.listen);
    }
    if (!a.data_dir.empty()) {
        config.data_dir = a.data_dir;
    }
    if (a.display_threshold) {
        config.display_threshold = *a.display_threshold;
    }
    if (!a.static_dir.empty()) {
        config.static_dir = fs::path(a.static_dir);
    }
    service::serve(config, [&](int port) {
        out << "listening on http://" << config.host << ":" << port << "/api/v1 (data: " << config.data_dir.string()
            << ")\n"
            << std::flush;
    });
    return kExitOk;
}

int run_generate(const GenerateArgs& a, std::ostream& out) {
    GeneratorConfig config;
    config.n_objects = a.objects;
    config.cardinalities = GeneratorConfig::spread_cardinalities(a.attrs, a.min_k, a.max_k);
    const auto skew = parse_skew(a.skew);
    if (!skew) {
        throw UsageError("skew must be 'uniform' or 'zipf'");
    }
    config.skew = *skew;
    config.zipf_exponent = a.zipf_exponent;
    config.rng_seed = a.seed;
    config.unique_rows = !a.no_unique;
    config.latent_profiles = a.profiles;
    config.profile_fidelity = a.fidelity;
    const Universe u = generate_universe(config);
    std::ostringstream csv;
    save_csv(u, csv);
    if (a.index) {
        save_index(u, a.out);
    } else {
        std::ofstream file(a.out, std::ios::binary);
        file << csv.str();
        if (!file.flush()) {
            throw ValidationError("cannot write " + a.out);
        }
    }
    out << json{{"out", a.out},
                {"objects", u.object_count()},
                {"attributes", u.attribute_count()},
                {"seed", a.seed},
                {"sha256", sha256_hex(csv.str())}}
               .dump(2)
        << "\n";
    return kExitOk;
}

int exit_code_for(const Error& e) {
    const std::string& c = e.code();
    if (c == "usage_error") {
        return kExitUsage;
    }
    if (c == "resource_limit") {
        return kExitResource;
    }
    return kExitData;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Identity tracing by attribute discriminability", "idtrace"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Parse a CSV and write a binary index");
    c_ingest->add_option("csv", ingest.csv, "Input CSV (header object_id,...)")->required();
    c_ingest->add_option("--out,-o", ingest.out, "Index file to write")->required();

    StatsArgs stats;
    auto* c_stats = app.add_subcommand("stats", "Dataset and attribute discriminability statistics");
    c_stats->add_option("dataset", stats.dataset, "CSV or index")->required();
    c_stats->add_option("--attr", stats.attr, "Per-value statistics for one attribute");
    c_stats->add_option("--format", stats.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

    CoresetArgs coreset;
    auto* c_coreset = app.add_subcommand("coreset", "Core identification sets of one object");
    c_coreset->add_option("dataset", coreset.dataset, "CSV or index")->required();
    c_coreset->add_option("--object", coreset.object, "Target object_id")->required();
    c_coreset->add_option("--known", coreset.known, "Seed observations a=v,b=w");
    c_coreset->add_flag("--enumerate", coreset.enumerate, "List every core set instead of the greedy one");
    c_coreset->add_option("--max-size", coreset.max_size, "Largest set to enumerate (default: all attributes)");
    c_coreset->add_flag("--strict", coreset.strict, "Subsets must not identify any object of the space");

    TraceArgs trace;
    auto* c_trace = app.add_subcommand("trace", "Trace an object's identity");
    c_trace->add_option("dataset", trace.dataset, "CSV or index")->required();
    c_trace->add_option("--object", trace.object, "Target object_id (answers come from its stored values)");
    c_trace->add_option("--known", trace.known, "Known observations a=v,b=w");
    c_trace->add_option("--strategy", trace.strategy, "titf or random")->check(CLI::IsMember({"titf", "random"}));
    c_trace->add_option("--seed", trace.seed, "Seed for the random strategy")->capture_default_str();
    c_trace->add_flag("--interactive", trace.interactive, "Read observed values from stdin");
    c_trace->add_flag("--literal", trace.literal, "Keep acquiring zero-information attributes");
    c_trace->add_option("--latency-ms", trace.latency_ms, "Simulated cost per acquisition");

    BenchArgs bench_args;
    auto* c_bench = app.add_subcommand("bench", "Run the experiment suite");
    c_bench->add_option("--config", bench_args.config, "JSON configuration")->required();
    c_bench->add_option("--out", bench_args.out, "Output directory")->required();

    ServeArgs serve;
    auto* c_serve = app.add_subcommand("serve", "Run the HTTP service");
    c_serve->add_option("--listen", serve.listen, "host:port (env IDTRACE_LISTEN, default 127.0.0.1:8080)");
    c_serve->add_option("--data-dir", serve.data_dir, "Persistence directory (env IDTRACE_DATA_DIR)");
    c_serve->add_option("--display-threshold", serve.display_threshold,
                        "List survivors at or below this count (env IDTRACE_DISPLAY_THRESHOLD, default 50)");
    c_serve->add_option("--static-dir", serve.static_dir, "Serve UI assets from here (env IDTRACE_STATIC_DIR)");

    GenerateArgs gen;
    auto* c_gen = app.add_subcommand("generate", "Write a synthetic dataset");
    c_gen->add_option("--objects", gen.objects, "Number of objects")->capture_default_str();
    c_gen->add_option("--attrs", gen.attrs, "Number of attributes")->capture_default_str();
    c_gen->add_option("--min-k", gen.min_k, "Smallest cardinality")->capture_default_str();
    c_gen->add_option("--max-k", gen.max_k, "Largest cardinality")->capture_default_str();
    c_gen->add_option("--skew", gen.skew, "uniform or zipf")->capture_default_str();
    c_gen->add_option("--zipf-exponent", gen.zipf_exponent, "Zipf exponent")->capture_default_str();
    c_gen->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
    c_gen->add_flag("--no-unique", gen.no_unique, "Allow duplicate rows");
    c_gen->add_option("--profiles", gen.profiles, "Latent prototype rows (0 = independent)")->capture_default_str();
    c_gen->add_option("--fidelity", gen.fidelity, "Probability a cell copies its prototype")->capture_default_str();
    c_gen->add_option("--out", gen.out, "Output file")->required();
    c_gen->add_flag("--index", gen.index, "Write a binary index instead of CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (c_ingest->parsed()) {
            return run_ingest(ingest, out);
        }
        if (c_stats->parsed()) {
            return run_stats(stats, out);
        }
        if (c_coreset->parsed()) {
            return run_coreset(coreset, out);
        }
        if (c_trace->parsed()) {
            return run_trace(trace, in, out, err);
        }
        if (c_bench->parsed()) {
            return run_bench_cmd(bench_args, out, err);
        }
        if (c_serve->parsed()) {
            return run_serve(serve, out);
        }
        if (c_gen->parsed()) {
            return run_generate(gen, out);
        }
    } catch (const Error& e) {
        err << "idtrace: " << e.code() << ": " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "idtrace: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace idtrace::cli
