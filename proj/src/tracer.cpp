#include "idtrace/tracer.hpp"

#include <algorithm>
#include <random>

#include "idtrace/errors.hpp"

namespace idtrace {

std::string_view to_string(SessionStatus status) noexcept {
    switch (status) {
        case SessionStatus::active:
            return "active";
        case SessionStatus::identified:
            return "identified";
        case SessionStatus::ambiguous:
            return "ambiguous";
        case SessionStatus::inconsistent:
            return "inconsistent";
    }
    return "unknown";
}

std::string_view to_string(Strategy strategy) noexcept { return strategy == Strategy::titf ? "titf" : "random"; }

std::optional<Strategy> parse_strategy(std::string_view text) noexcept {
    if (text == "titf") {
        return Strategy::titf;
    }
    if (text == "random") {
        return Strategy::random;
    }
    return std::nullopt;
}

Session::Session(std::shared_ptr<const Universe> universe, ObservationSet known)
    : universe_(std::move(universe)), known_(std::move(known)) {
    for (const auto& obs : known_) {
        universe_->validate(obs);
    }
    candidates_ = apply_observations(*universe_, universe_->all(), known_);
    count_history_.push_back(candidates_.size());
    if (!candidates_.empty()) {
        entropy_history_.push_back(identity_entropy(candidates_.size()));
    }
    update_status();
}

bool Session::is_settled(AttributeId attribute) const noexcept {
    if (known_.contains(attribute)) {
        return true;
    }
    if (std::any_of(path_.begin(), path_.end(), [&](const Observation& o) { return o.attribute == attribute; })) {
        return true;
    }
    return std::find(unavailable_.begin(), unavailable_.end(), attribute) != unavailable_.end();
}

std::vector<AttributeId> Session::remaining_attributes() const {
    std::vector<AttributeId> out;
    for (AttributeId a = 0; a < universe_->attribute_count(); ++a) {
        if (!is_settled(a)) {
            out.push_back(a);
        }
    }
    return out;
}

void Session::require_active(const char* action) const {
    if (status_ != SessionStatus::active) {
        throw UsageError(std::string("cannot ") + action + ": session is " + std::string(to_string(status_)));
    }
}

Recommendation Session::recommend() const {
    require_active("recommend");
    Recommendation rec;
    for (AttributeId a : remaining_attributes()) {
        try {
            rec.ranking.push_back({a, average_discriminability(*universe_, candidates_, a)});
        } catch (const UndefinedAttributeError&) {
        }
    }
    if (rec.ranking.empty()) {
        throw ExhaustedError("no remaining attribute is defined on the candidates");
    }
    std::stable_sort(rec.ranking.begin(), rec.ranking.end(),
                     [](const RankedAttribute& x, const RankedAttribute& y) { return x.bits > y.bits; });
    rec.chosen = rec.ranking.front().attribute;
    return rec;
}

void Session::observe(const Observation& obs) {
    require_active("observe");
    universe_->validate(obs);
    if (is_settled(obs.attribute)) {
        throw UsageError("attribute '" + universe_->schema()[obs.attribute].name + "' was already acquired");
    }
    path_.push_back(obs);
    candidates_ = filter(*universe_, candidates_, obs);
    count_history_.push_back(candidates_.size());
    if (!candidates_.empty()) {
        entropy_history_.push_back(identity_entropy(candidates_.size()));
    }
    update_status();
}

std::map<ValueCode, WhatIfOutcome> Session::whatif(AttributeId attribute) const {
    require_active("preview");
    if (attribute >= universe_->attribute_count()) {
        throw ValidationError("attribute index " + std::to_string(attribute) + " out of range");
    }
    if (is_settled(attribute)) {
        throw UsageError("attribute '" + universe_->schema()[attribute].name + "' was already acquired");
    }
    std::map<ValueCode, WhatIfOutcome> out;
    for (const auto& [value, count] : value_counts(*universe_, candidates_, attribute)) {
        if (value != kMissing) {
            out.emplace(value, WhatIfOutcome{count, identity_entropy(count)});
        }
    }
    return out;
}

void Session::mark_unavailable(AttributeId attribute) {
    require_active("mark unavailable");
    if (!is_settled(attribute)) {
        unavailable_.push_back(attribute);
    }
    update_status();
}

void Session::conclude_ambiguous() {
    require_active("conclude");
    status_ = SessionStatus::ambiguous;
}

void Session::update_status() {
    if (candidates_.empty()) {
        status_ = SessionStatus::inconsistent;
    } else if (candidates_.size() == 1) {
        status_ = SessionStatus::identified;
    } else if (remaining_attributes().empty()) {
        status_ = SessionStatus::ambiguous;
    } else {
        status_ = SessionStatus::active;
    }
}

ObservationSet observations_of(const Universe& universe, ObjectIndex object, const std::vector<AttributeId>& attributes) {
    ObservationSet out;
    for (AttributeId a : attributes) {
        const ValueCode v = universe.cell(object, a);
        if (v != kMissing) {
            out.insert({a, v});
        }
    }
    return out;
}

namespace {

template <typename Choose>
TraceResult run_trace(const std::shared_ptr<const Universe>& universe, ObjectIndex target, const ObservationSet& known,
                      Strategy strategy, const TraceOptions& options, Choose&& choose) {
    const auto start = std::chrono::steady_clock::now();
    if (target >= universe->object_count()) {
        throw InvalidSetError("target index out of range");
    }
    Session session(universe, known);
    if (!session.candidates().contains(target)) {
        throw InvalidSetError("known observations exclude target '" + universe->object_id(target) + "'");
    }
    std::chrono::nanoseconds simulated{0};
    while (session.status() == SessionStatus::active) {
        const std::optional<AttributeId> next = choose(session);
        if (!next) {
            session.conclude_ambiguous();
            break;
        }
        const ValueCode v = universe->cell(target, *next);
        if (v == kMissing) {
            session.mark_unavailable(*next);
            continue;
        }
        session.observe({*next, v});
        simulated += options.latency.of(*next);
    }

    TraceResult result;
    result.strategy = strategy;
    result.status = session.status();
    result.target = target;
    session.candidates().mask().for_each([&](ObjectIndex i) { result.target_found.push_back(universe->object_id(i)); });
    result.path = session.path();
    result.acquisitions = result.path.size();
    result.entropy_history = session.entropy_history();
    result.simulated_latency = simulated;
    result.elapsed = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start) +
                     simulated;
    return result;
}

}  // namespace

TraceResult run_titf(const std::shared_ptr<const Universe>& universe, ObjectIndex target, const ObservationSet& known,
                     const TraceOptions& options) {
    return run_trace(universe, target, known, Strategy::titf, options,
                     [&](const Session& s) -> std::optional<AttributeId> {
                         Recommendation rec;
                         try {
                             rec = s.recommend();
                         } catch (const ExhaustedError&) {
                             return std::nullopt;
                         }
                         if (!options.literal_loop && rec.ranking.front().bits.value <= 0.0) {
                             return std::nullopt;
                         }
                         return rec.chosen;
                     });
}

TraceResult run_random_baseline(const std::shared_ptr<const Universe>& universe, ObjectIndex target,
                                const ObservationSet& known, std::uint64_t rng_seed, const TraceOptions& options) {
    std::mt19937_64 rng(rng_seed);
    return run_trace(universe, target, known, Strategy::random, options,
                     [&](const Session& s) -> std::optional<AttributeId> {
                         const auto remaining = s.remaining_attributes();
                         if (remaining.empty()) {
                             return std::nullopt;
                         }
                         std::uniform_int_distribution<std::size_t> pick(0, remaining.size() - 1);
                         return remaining[pick(rng)];
                     });
}

}  // namespace idtrace
