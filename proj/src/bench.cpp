#include "idtrace/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "idtrace/coreset.hpp"
#include "idtrace/digest.hpp"
#include "idtrace/entropy.hpp"
#include "idtrace/errors.hpp"

namespace idtrace::bench {

namespace {

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double to_ms(std::chrono::nanoseconds ns) { return static_cast<double>(ns.count()) / 1e6; }

double reduction_pct(double baseline, double ours) { return baseline > 0.0 ? 100.0 * (baseline - ours) / baseline : 0.0; }

// ---- SVG line charts ------------------------------------------------------

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<':
                out += "&lt;";
                break;
            case '>':
                out += "&gt;";
                break;
            case '&':
                out += "&amp;";
                break;
            default:
                out.push_back(c);
        }
    }
    return out;
}

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series) {
    constexpr double width = 720, height = 440, left = 70, right = 170, top = 40, bottom = 60;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    double x_min = INFINITY, x_max = -INFINITY, y_min = 0.0, y_max = -INFINITY;
    for (const auto& s : series) {
        for (auto [x, y] : s.points) {
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
        }
    }
    if (!std::isfinite(x_min)) {
        x_min = 0.0;
        x_max = 1.0;
        y_max = 1.0;
    }
    if (x_max == x_min) {
        x_max = x_min + 1.0;
    }
    if (y_max <= y_min) {
        y_max = y_min + 1.0;
    }
    auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
    auto py = [&](double y) { return top + plot_h - (y - y_min) / (y_max - y_min) * plot_h; };

    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title)
        << "</text>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
        << top + plot_h << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
        << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double xv = x_min + (x_max - x_min) * t / 5.0;
        const double yv = y_min + (y_max - y_min) * t / 5.0;
        svg << "<text x=\"" << px(xv) << "\" y=\"" << top + plot_h + 18 << "\" text-anchor=\"middle\">"
            << format_number(std::round(xv * 100) / 100) << "</text>\n";
        svg << "<text x=\"" << left - 8 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
            << format_number(std::round(yv * 100) / 100) << "</text>\n";
        svg << "<line x1=\"" << left << "\" y1=\"" << py(yv) << "\" x2=\"" << left + plot_w << "\" y2=\"" << py(yv)
            << "\" stroke=\"#ddd\"/>\n";
    }
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 18 << "\" text-anchor=\"middle\">"
        << xml_escape(x_label) << "</text>\n";
    svg << "<text transform=\"translate(18," << top + plot_h / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << xml_escape(y_label) << "</text>\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = palette[i % std::size(palette)];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (auto [x, y] : series[i].points) {
            svg << px(x) << ',' << py(y) << ' ';
        }
        svg << "\"/>\n";
        for (auto [x, y] : series[i].points) {
            svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
        }
        const double ly = top + 14.0 * static_cast<double>(i);
        svg << "<rect x=\"" << left + plot_w + 12 << "\" y=\"" << ly << "\" width=\"10\" height=\"10\" fill=\"" << color
            << "\"/>\n";
        svg << "<text x=\"" << left + plot_w + 26 << "\" y=\"" << ly + 9 << "\">" << xml_escape(series[i].name)
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_file(const std::filesystem::path& path, const std::string& content, std::vector<std::filesystem::path>& files) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError("cannot write '" + path.string() + "'");
    }
    out << content;
    files.push_back(path);
}

std::optional<double> parse_bits_cell(const std::string& cell) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        return std::nullopt;
    }
    return v;
}

}  // namespace

// ---- Table ----------------------------------------------------------------

void Table::write_csv(std::ostream& out) const {
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i > 0) {
                out << ',';
            }
            out << cells[i];
        }
        out << '\n';
    };
    line(columns);
    for (const auto& row : rows) {
        line(row);
    }
}

std::string Table::to_csv() const {
    std::ostringstream out;
    write_csv(out);
    return out.str();
}

void Table::validate() const {
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != columns.size()) {
            throw ValidationError("table row has " + std::to_string(rows[r].size()) + " cells, expected " +
                                      std::to_string(columns.size()),
                                  r + 2);
        }
        for (const auto& cell : rows[r]) {
            if (cell.empty()) {
                throw ValidationError("table row has an empty cell", r + 2);
            }
        }
    }
}

std::string format_number(double value) {
    if (value == 0.0) {
        return "0";
    }
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = splitmix64(base);
    for (std::uint64_t p : parts) {
        h = splitmix64(h ^ splitmix64(p));
    }
    return h;
}

// ---- grouping -------------------------------------------------------------

std::vector<CandidateSet> make_groups(const Universe& universe, const Grouping& grouping, std::uint64_t seed) {
    const std::size_t n = universe.object_count();
    if (grouping.group_count == 0 || grouping.group_size == 0) {
        throw ValidationError("group count and size must be positive");
    }
    if (grouping.group_count * grouping.group_size > n) {
        throw ValidationError("grouping needs " + std::to_string(grouping.group_count * grouping.group_size) +
                              " objects but the dataset has " + std::to_string(n));
    }
    std::vector<ObjectIndex> order(n);
    std::iota(order.begin(), order.end(), ObjectIndex{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<CandidateSet> groups;
    groups.reserve(grouping.group_count);
    for (std::size_t g = 0; g < grouping.group_count; ++g) {
        std::span<const ObjectIndex> slice(order.data() + g * grouping.group_size, grouping.group_size);
        groups.push_back(CandidateSet::of(n, slice));
    }
    return groups;
}

std::vector<ObjectIndex> sample_objects(std::size_t n, std::size_t count, std::uint64_t seed) {
    if (count > n) {
        throw ValidationError("cannot sample " + std::to_string(count) + " objects from " + std::to_string(n));
    }
    std::vector<ObjectIndex> order(n);
    std::iota(order.begin(), order.end(), ObjectIndex{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(count);
    std::sort(order.begin(), order.end());
    return order;
}

CandidateSet with_member(const CandidateSet& group, ObjectIndex object) {
    Bitmask mask = group.mask();
    mask.set(object);
    return CandidateSet(std::move(mask));
}

// ---- core-set multiplicity ------------------------------------------------

std::string_view to_string(CellStatus status) noexcept {
    switch (status) {
        case CellStatus::ok:
            return "ok";
        case CellStatus::censored:
            return "censored";
        case CellStatus::indistinguishable:
            return "indistinguishable";
    }
    return "unknown";
}

std::vector<MultiplicityRow> coreset_multiplicity(const Universe& universe, std::span<const CandidateSet> groups,
                                                  std::span<const ObjectIndex> probes, std::size_t max_set_size,
                                                  unsigned threads) {
    const std::size_t m = universe.attribute_count();
    if (max_set_size == 0) {
        max_set_size = m;
    }
    std::vector<MultiplicityRow> rows(probes.size() * groups.size());
    parallel_for(rows.size(), threads, [&](std::size_t cell) {
        const std::size_t p = cell / groups.size();
        const std::size_t g = cell % groups.size();
        MultiplicityRow& row = rows[cell];
        row.probe = probes[p];
        row.group = g;
        const CandidateSet space = with_member(groups[g], probes[p]);

        std::vector<AttributeId> defined;
        for (AttributeId a = 0; a < m; ++a) {
            if (universe.cell(probes[p], a) != kMissing) {
                defined.push_back(a);
            }
        }
        if (!is_identification_set(universe, space, probes[p], defined)) {
            row.status = CellStatus::indistinguishable;
            return;
        }
        try {
            const auto sets = enumerate_core_sets(universe, space, probes[p], max_set_size);
            row.core_sets = sets.size();
            if (!sets.empty()) {
                row.min_size = sets.front().size();
                row.max_size = sets.back().size();
            }
        } catch (const ResourceLimitError&) {
            row.status = CellStatus::censored;
        }
    });
    return rows;
}

Table multiplicity_table(const Universe& universe, std::span<const MultiplicityRow> rows) {
    Table t;
    t.columns = {"probe_id", "group", "status", "core_set_count", "min_size", "max_size"};
    for (const auto& r : rows) {
        t.rows.push_back({universe.object_id(r.probe), std::to_string(r.group + 1), std::string(to_string(r.status)),
                          std::to_string(r.core_sets), std::to_string(r.min_size), std::to_string(r.max_size)});
    }
    return t;
}

// ---- discriminability across objects --------------------------------------

ObjectProfiles discriminability_across_objects(const Universe& universe, std::span<const CandidateSet> groups) {
    ObjectProfiles out;
    out.values.columns = {"group", "object_id", "attribute", "bits"};
    out.profile.columns = {"group", "object_id", "rank", "attribute", "bits"};
    const auto& schema = universe.schema();
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const std::string group_label = std::to_string(g + 1);
        groups[g].mask().for_each([&](ObjectIndex i) {
            std::vector<std::pair<double, AttributeId>> profile;
            for (AttributeId a = 0; a < universe.attribute_count(); ++a) {
                const ValueCode v = universe.cell(i, a);
                std::string cell = "missing";
                if (v != kMissing) {
                    const double bits = attribute_discriminability(universe, groups[g], {a, v}).value;
                    cell = format_number(bits);
                    profile.emplace_back(bits, a);
                }
                out.values.rows.push_back({group_label, universe.object_id(i), schema[a].name, cell});
            }
            std::stable_sort(profile.begin(), profile.end(),
                             [](const auto& x, const auto& y) { return x.first > y.first; });
            for (std::size_t r = 0; r < profile.size(); ++r) {
                out.profile.rows.push_back({group_label, universe.object_id(i), std::to_string(r + 1),
                                            schema[profile[r].second].name, format_number(profile[r].first)});
            }
        });
    }
    return out;
}

// ---- discriminability across spaces ---------------------------------------

Table discriminability_across_spaces(const Universe& universe, std::span<const CandidateSet> groups,
                                     ObjectIndex probe) {
    Table t;
    t.columns = {"group", "probe_id"};
    for (const auto& attr : universe.schema().attributes()) {
        t.columns.push_back(attr.name);
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::vector<std::string> row{std::to_string(g + 1), universe.object_id(probe)};
        for (AttributeId a = 0; a < universe.attribute_count(); ++a) {
            const ValueCode v = universe.cell(probe, a);
            if (v == kMissing) {
                row.emplace_back("missing");
            } else if (groups[g].empty() || groups[g].mask().count_and(universe.value_mask(a, v)) == 0) {
                row.emplace_back("inf");
            } else {
                row.push_back(format_number(attribute_discriminability(universe, groups[g], {a, v}).value));
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

// ---- TITF against random --------------------------------------------------

std::optional<MissingProtocol> parse_protocol(std::string_view text) noexcept {
    if (text == "bernoulli") {
        return MissingProtocol::bernoulli;
    }
    if (text == "fixed_count") {
        return MissingProtocol::fixed_count;
    }
    return std::nullopt;
}

ObservationSet simulate_known(const Universe& universe, ObjectIndex object, double missing_rate,
                              MissingProtocol protocol, std::mt19937_64& rng) {
    const std::size_t m = universe.attribute_count();
    std::vector<bool> hidden(m, false);
    if (protocol == MissingProtocol::bernoulli) {
        std::bernoulli_distribution hide(missing_rate);
        for (std::size_t a = 0; a < m; ++a) {
            hidden[a] = hide(rng);
        }
    } else {
        const auto count = static_cast<std::size_t>(std::ceil(missing_rate * static_cast<double>(m) - 1e-9));
        std::vector<AttributeId> order(m);
        std::iota(order.begin(), order.end(), AttributeId{0});
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t j = 0; j < std::min(count, m); ++j) {
            hidden[order[j]] = true;
        }
    }
    std::vector<AttributeId> visible;
    for (AttributeId a = 0; a < m; ++a) {
        if (!hidden[a]) {
            visible.push_back(a);
        }
    }
    return observations_of(universe, object, visible);
}

void EfficiencyConfig::validate(std::size_t n_objects) const {
    if (missing_rates.empty()) {
        throw ValidationError("at least one missing rate is required");
    }
    for (double s : missing_rates) {
        if (!(s >= 0.0 && s < 1.0)) {
            throw ValidationError("missing rate " + format_number(s) + " outside [0, 1)");
        }
    }
    if (objects == 0 || objects > n_objects) {
        throw ValidationError("objects per run must be in [1, " + std::to_string(n_objects) + "]");
    }
    if (baseline_repetitions == 0) {
        throw ValidationError("baseline repetitions must be positive");
    }
}

EfficiencyResult titf_vs_random(const std::shared_ptr<const Universe>& universe, const EfficiencyConfig& config) {
    config.validate(universe->object_count());
    const auto objects = sample_objects(universe->object_count(), config.objects, derive_seed(config.seed, {0}));
    const std::size_t rates = config.missing_rates.size();

    EfficiencyResult result;
    result.rows.resize(rates * objects.size());
    parallel_for(result.rows.size(), config.threads, [&](std::size_t cell) {
        const std::size_t r = cell / objects.size();
        const std::size_t o = cell % objects.size();
        const ObjectIndex target = objects[o];
        std::mt19937_64 hide_rng(derive_seed(config.seed, {1, r, target}));
        const ObservationSet known =
            simulate_known(*universe, target, config.missing_rates[r], config.protocol, hide_rng);

        EfficiencyObjectRow& row = result.rows[cell];
        row.missing_rate = config.missing_rates[r];
        row.object = target;
        row.known_count = known.size();

        const TraceResult titf = run_titf(universe, target, known, config.trace);
        row.titf_acquisitions = titf.acquisitions;
        row.titf_status = titf.status;
        row.titf_time_ms = to_ms(titf.elapsed);

        double acq = 0.0, ms = 0.0;
        for (std::size_t rep = 0; rep < config.baseline_repetitions; ++rep) {
            const TraceResult rnd =
                run_random_baseline(universe, target, known, derive_seed(config.seed, {2, r, target, rep}), config.trace);
            acq += static_cast<double>(rnd.acquisitions);
            ms += to_ms(rnd.elapsed);
        }
        row.random_mean_acquisitions = acq / static_cast<double>(config.baseline_repetitions);
        row.random_mean_time_ms = ms / static_cast<double>(config.baseline_repetitions);
    });

    auto summarize = [&](std::optional<double> rate, std::span<const EfficiencyObjectRow> rows) {
        EfficiencySummary s;
        s.missing_rate = rate;
        s.objects = rows.size();
        for (const auto& row : rows) {
            s.titf_mean_acquisitions += static_cast<double>(row.titf_acquisitions);
            s.random_mean_acquisitions += row.random_mean_acquisitions;
            s.titf_mean_time_ms += row.titf_time_ms;
            s.random_mean_time_ms += row.random_mean_time_ms;
        }
        const double n = static_cast<double>(std::max<std::size_t>(rows.size(), 1));
        s.titf_mean_acquisitions /= n;
        s.random_mean_acquisitions /= n;
        s.titf_mean_time_ms /= n;
        s.random_mean_time_ms /= n;
        s.acquisition_reduction_pct = reduction_pct(s.random_mean_acquisitions, s.titf_mean_acquisitions);
        s.time_reduction_pct = reduction_pct(s.random_mean_time_ms, s.titf_mean_time_ms);
        return s;
    };
    for (std::size_t r = 0; r < rates; ++r) {
        result.per_rate.push_back(summarize(
            config.missing_rates[r],
            std::span<const EfficiencyObjectRow>(result.rows.data() + r * objects.size(), objects.size())));
    }
    result.pooled = summarize(std::nullopt, result.rows);
    return result;
}

Table EfficiencyResult::summary_table() const {
    Table t;
    t.columns = {"missing_rate", "objects", "titf_mean_acquisitions", "random_mean_acquisitions",
                 "acquisition_reduction_pct"};
    auto add = [&](const EfficiencySummary& s) {
        t.rows.push_back({s.missing_rate ? format_number(*s.missing_rate) : "all", std::to_string(s.objects),
                          format_number(s.titf_mean_acquisitions), format_number(s.random_mean_acquisitions),
                          format_number(s.acquisition_reduction_pct)});
    };
    for (const auto& s : per_rate) {
        add(s);
    }
    add(pooled);
    return t;
}

Table EfficiencyResult::object_table(const Universe& universe) const {
    Table t;
    t.columns = {"missing_rate", "object_id", "known_count", "titf_acquisitions", "titf_status",
                 "random_mean_acquisitions"};
    for (const auto& row : rows) {
        t.rows.push_back({format_number(row.missing_rate), universe.object_id(row.object),
                          std::to_string(row.known_count), std::to_string(row.titf_acquisitions),
                          std::string(to_string(row.titf_status)), format_number(row.random_mean_acquisitions)});
    }
    return t;
}

Table EfficiencyResult::timing_table() const {
    Table t;
    t.columns = {"missing_rate", "objects", "titf_mean_time_ms", "random_mean_time_ms", "time_reduction_pct"};
    auto add = [&](const EfficiencySummary& s) {
        t.rows.push_back({s.missing_rate ? format_number(*s.missing_rate) : "all", std::to_string(s.objects),
                          format_number(s.titf_mean_time_ms), format_number(s.random_mean_time_ms),
                          format_number(s.time_reduction_pct)});
    };
    for (const auto& s : per_rate) {
        add(s);
    }
    add(pooled);
    return t;
}

// ---- config ---------------------------------------------------------------

namespace {

Grouping parse_grouping(const nlohmann::json& j, Grouping fallback) {
    fallback.group_count = j.value("group_count", fallback.group_count);
    fallback.group_size = j.value("group_size", fallback.group_size);
    return fallback;
}

}  // namespace

BenchConfig parse_bench_config(const nlohmann::json& json, const std::filesystem::path& base_dir) {
    if (!json.is_object()) {
        throw ValidationError("bench config must be a JSON object");
    }
    BenchConfig c;
    try {
        c.seed = json.value("seed", c.seed);
        c.charts = json.value("charts", c.charts);
        c.threads = json.value("threads", c.threads);
        if (json.contains("dataset")) {
            std::filesystem::path p = json.at("dataset").get<std::string>();
            c.dataset = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        }
        if (json.contains("generator")) {
            const auto& g = json.at("generator");
            c.generator.n_objects = g.value("objects", c.generator.n_objects);
            if (g.contains("cardinalities")) {
                c.generator.cardinalities = g.at("cardinalities").get<std::vector<std::size_t>>();
            } else if (g.contains("attributes") || g.contains("cardinality_range")) {
                const std::size_t n = g.value("attributes", c.generator.cardinalities.size());
                const auto range = g.value("cardinality_range", std::vector<std::size_t>{2, 12});
                if (range.size() != 2) {
                    throw ValidationError("cardinality_range needs [lo, hi]");
                }
                c.generator.cardinalities = GeneratorConfig::spread_cardinalities(n, range[0], range[1]);
            }
            if (g.contains("skew")) {
                const auto skew = parse_skew(g.at("skew").get<std::string>());
                if (!skew) {
                    throw ValidationError("skew must be 'uniform' or 'zipf'");
                }
                c.generator.skew = *skew;
            }
            c.generator.zipf_exponent = g.value("zipf_exponent", c.generator.zipf_exponent);
            c.generator.rng_seed = g.value("seed", c.generator.rng_seed);
            c.generator.unique_rows = g.value("unique", c.generator.unique_rows);
            c.generator.latent_profiles = g.value("latent_profiles", c.generator.latent_profiles);
            c.generator.profile_fidelity = g.value("profile_fidelity", c.generator.profile_fidelity);
        }
        if (json.contains("experiments")) {
            c.experiments = json.at("experiments").get<std::vector<std::string>>();
            for (const auto& e : c.experiments) {
                if (e != "q1" && e != "q2" && e != "q3" && e != "q4") {
                    throw ValidationError("unknown experiment '" + e + "'");
                }
            }
        }
        if (json.contains("q1")) {
            const auto& q = json.at("q1");
            c.q1_grouping = parse_grouping(q, c.q1_grouping);
            c.q1_probes = q.value("probes", c.q1_probes);
            c.q1_max_set_size = q.value("max_set_size", c.q1_max_set_size);
        }
        if (json.contains("q2")) {
            c.q2_grouping = parse_grouping(json.at("q2"), c.q2_grouping);
        }
        if (json.contains("q3")) {
            const auto& q = json.at("q3");
            c.q3_grouping = parse_grouping(q, c.q3_grouping);
            if (q.contains("probe")) {
                c.q3_probe = q.at("probe").get<std::string>();
            }
        }
        c.q4.seed = c.seed;
        c.q4.threads = c.threads;
        if (json.contains("q4")) {
            const auto& q = json.at("q4");
            c.q4.missing_rates = q.value("missing_rates", c.q4.missing_rates);
            c.q4.objects = q.value("objects", c.q4.objects);
            c.q4.baseline_repetitions = q.value("baseline_repetitions", c.q4.baseline_repetitions);
            if (q.contains("protocol")) {
                const auto protocol = parse_protocol(q.at("protocol").get<std::string>());
                if (!protocol) {
                    throw ValidationError("protocol must be 'bernoulli' or 'fixed_count'");
                }
                c.q4.protocol = *protocol;
            }
            c.q4.trace.literal_loop = q.value("literal_loop", false);
            c.q4.trace.latency.fixed =
                std::chrono::microseconds(static_cast<long long>(q.value("latency_ms", 0.0) * 1000.0));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bench config: ") + e.what());
    }
    return c;
}

BenchReport run_bench(const BenchConfig& config, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::shared_ptr<const Universe> universe =
        config.dataset ? std::make_shared<const Universe>(load_dataset(*config.dataset))
                       : std::make_shared<const Universe>(generate_universe(config.generator));

    std::ostringstream csv;
    save_csv(*universe, csv);

    BenchReport report;
    auto& meta = report.meta;
    meta["seed"] = config.seed;
    const double resolution_ns = 1e9 * static_cast<double>(std::chrono::steady_clock::period::num) /
                                 static_cast<double>(std::chrono::steady_clock::period::den);
    meta["timer"] = {{"clock", "steady_clock"},
                     {"resolution_ns", resolution_ns},
                     {"measures", "tracing loop only; dataset load and index build excluded"}};
    meta["dataset"] = {{"source", config.dataset ? config.dataset->string() : std::string("generator")},
                       {"sha256", sha256_hex(csv.str())},
                       {"objects", universe->object_count()},
                       {"attributes", universe->attribute_count()}};
    if (!config.dataset) {
        meta["generator"] = {{"objects", config.generator.n_objects},
                             {"cardinalities", config.generator.cardinalities},
                             {"skew", config.generator.skew == Skew::zipf ? "zipf" : "uniform"},
                             {"zipf_exponent", config.generator.zipf_exponent},
                             {"seed", config.generator.rng_seed},
                             {"unique", config.generator.unique_rows},
                             {"latent_profiles", config.generator.latent_profiles},
                             {"profile_fidelity", config.generator.profile_fidelity}};
    }
    meta["experiments"] = config.experiments;

    auto want = [&](const char* name) {
        return std::find(config.experiments.begin(), config.experiments.end(), name) != config.experiments.end();
    };
    auto emit_table = [&](const char* file, const Table& table) {
        table.validate();
        write_file(out_dir / file, table.to_csv(), report.files);
    };

    if (want("q1")) {
        const auto groups = make_groups(*universe, config.q1_grouping, derive_seed(config.seed, {11}));
        const auto probes = sample_objects(universe->object_count(), config.q1_probes, derive_seed(config.seed, {12}));
        const auto rows = coreset_multiplicity(*universe, groups, probes, config.q1_max_set_size, config.threads);
        emit_table("q1.csv", multiplicity_table(*universe, rows));
        if (config.charts) {
            std::vector<Series> series;
            for (std::size_t p = 0; p < probes.size(); ++p) {
                Series s{universe->object_id(probes[p]), {}};
                for (std::size_t g = 0; g < groups.size(); ++g) {
                    s.points.emplace_back(static_cast<double>(g + 1),
                                          static_cast<double>(rows[p * groups.size() + g].core_sets));
                }
                series.push_back(std::move(s));
            }
            write_file(out_dir / "q1.svg",
                       line_chart("Core identification sets per observation space", "group", "core sets", series),
                       report.files);
        }
    }

    if (want("q2")) {
        const auto groups = make_groups(*universe, config.q2_grouping, derive_seed(config.seed, {21}));
        const auto profiles = discriminability_across_objects(*universe, groups);
        emit_table("q2.csv", profiles.values);
        emit_table("q2_profile.csv", profiles.profile);
        if (config.charts && !groups.empty()) {
            std::vector<Series> series;
            const auto members = groups.front().members();
            for (std::size_t i = 0; i < std::min<std::size_t>(10, members.size()); ++i) {
                Series s{universe->object_id(members[i]), {}};
                for (const auto& row : profiles.profile.rows) {
                    if (row[0] == "1" && row[1] == s.name) {
                        s.points.emplace_back(std::stod(row[2]), parse_bits_cell(row[4]).value_or(0.0));
                    }
                }
                series.push_back(std::move(s));
            }
            write_file(out_dir / "q2.svg",
                       line_chart("Sorted attribute discriminability (group 1)", "rank", "bits", series),
                       report.files);
        }
    }

    if (want("q3")) {
        auto groups = make_groups(*universe, config.q3_grouping, derive_seed(config.seed, {31}));
        ObjectIndex probe = sample_objects(universe->object_count(), 1, derive_seed(config.seed, {32})).front();
        if (config.q3_probe) {
            const auto found = universe->find_object(*config.q3_probe);
            if (!found) {
                throw ValidationError("q3 probe '" + *config.q3_probe + "' not in dataset");
            }
            probe = *found;
        }
        for (auto& g : groups) {
            g = with_member(g, probe);
        }
        const Table table = discriminability_across_spaces(*universe, groups, probe);
        emit_table("q3.csv", table);
        if (config.charts) {
            std::vector<Series> series;
            for (const auto& row : table.rows) {
                Series s{"group " + row[0], {}};
                for (std::size_t a = 0; a + 2 < row.size(); ++a) {
                    if (auto bits = parse_bits_cell(row[a + 2]); bits && std::isfinite(*bits)) {
                        s.points.emplace_back(static_cast<double>(a + 1), *bits);
                    }
                }
                series.push_back(std::move(s));
            }
            write_file(out_dir / "q3.svg",
                       line_chart("Probe discriminability across observation spaces", "attribute", "bits", series),
                       report.files);
        }
    }

    if (want("q4")) {
        EfficiencyConfig q4 = config.q4;
        const auto result = titf_vs_random(universe, q4);
        emit_table("q4.csv", result.summary_table());
        emit_table("q4_objects.csv", result.object_table(*universe));
        emit_table("q4_timing.csv", result.timing_table());
        meta["q4"] = {{"missing_rates", q4.missing_rates},
                      {"objects", q4.objects},
                      {"baseline_repetitions", q4.baseline_repetitions},
                      {"protocol", q4.protocol == MissingProtocol::bernoulli ? "bernoulli" : "fixed_count"},
                      {"nondeterministic_files", {"q4_timing.csv"}}};
        if (config.charts) {
            Series titf{"TITF", {}}, rnd{"random", {}};
            for (const auto& s : result.per_rate) {
                titf.points.emplace_back(100.0 * *s.missing_rate, s.titf_mean_acquisitions);
                rnd.points.emplace_back(100.0 * *s.missing_rate, s.random_mean_acquisitions);
            }
            write_file(out_dir / "q4.svg",
                       line_chart("Mean acquisitions to identify", "missing attributes S (%)", "acquisitions",
                                  {titf, rnd}),
                       report.files);
        }
        report.efficiency = result;
    }

    nlohmann::json files = nlohmann::json::array();
    for (const auto& f : report.files) {
        files.push_back(f.filename().string());
    }
    meta["files"] = files;
    write_file(out_dir / "meta.json", meta.dump(2) + "\n", report.files);
    return report;
}

}  // namespace idtrace::bench
