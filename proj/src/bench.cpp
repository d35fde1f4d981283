#include "pomdpv/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace pomdpv {

std::string_view toString(RunMode m) {
    switch (m) {
        case RunMode::SingleShot: return "single-shot";
        case RunMode::Refine: return "refine";
        case RunMode::BeliefExplore: return "belief-explore";
    }
    return "refine";
}

RunMode parseRunMode(std::string_view text) {
    for (RunMode m : {RunMode::SingleShot, RunMode::Refine, RunMode::BeliefExplore}) {
        if (toString(m) == text) {
            return m;
        }
    }
    throw std::invalid_argument("unknown mode '" + std::string(text) + "'");
}

void RunConfig::validate() const {
    if (mode == RunMode::SingleShot && (!resolution || *resolution == 0)) {
        throw std::invalid_argument("single-shot mode needs a positive resolution");
    }
    if (mode != RunMode::SingleShot && resolution) {
        throw std::invalid_argument("a resolution is only meaningful in single-shot mode");
    }
    if (!(timeLimit > 0.0)) {
        throw std::invalid_argument("time budget must be positive");
    }
    if (heuristic.etaInit == 0 || !(heuristic.fRes > 1.0)) {
        throw std::invalid_argument("resolution schedule needs eta-init >= 1 and f-res > 1");
    }
    if (threshold) {
        parseThreshold(*threshold);
    }
}

Threshold<Rational> parseThreshold(std::string_view text) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && s.front() == ' ') {
            s.remove_prefix(1);
        }
        while (!s.empty() && s.back() == ' ') {
            s.remove_suffix(1);
        }
        return s;
    };
    text = trim(text);
    Comparison cmp;
    if (text.starts_with("<=")) {
        cmp = Comparison::LessEqual;
    } else if (text.starts_with(">=")) {
        cmp = Comparison::GreaterEqual;
    } else {
        throw std::invalid_argument("threshold must look like '<=0.7' or '>=0.65'");
    }
    auto value = trim(text.substr(2));
    try {
        return {cmp, parseRational(value)};
    } catch (std::exception const&) {
        throw std::invalid_argument("bad threshold value '" + std::string(value) + "'");
    }
}

namespace {

using Clock = std::chrono::steady_clock;

template<typename V>
double asDouble(Extended<V> const& e) {
    return e.infinite ? kInfinity : toDouble(e.value);
}

std::string thresholdText(std::optional<bool> decided) {
    if (!decided) {
        return "open";
    }
    return *decided ? "holds" : "refuted";
}

template<typename V>
RunOutput runBeliefExplore(RunConfig const& config, Problem<V> const& problem, RunRecord record) {
    auto start = Clock::now();
    auto deadline = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(config.timeLimit));
    auto prepared = prepareProblem(problem);
    auto dir = prepared.spec.direction;
    bool maxDir = dir == Direction::Max;
    auto values = underlyingMdpValues(prepared, config.precision);
    CheckOptions opts;
    opts.precision = config.precision;
    opts.scope = PrecisionScope::AllStates;
    auto mdpRes = check(toSparse(prepared.pomdp, prepared.spec), checkKindOf(prepared.spec.kind), dir, opts);
    auto policies = guessLowerBoundPolicies(prepared, mdpRes, config.heuristic.rhoSigma, config.precision);
    BeliefBound<V> pessimistic = [&](Belief<V> const& b) { return policies.at(b); };
    BeliefBound<V> optimistic = [&](Belief<V> const& b) { return eq1Bound(b, values, dir); };

    RunOutput out;
    Extended<V> lower{V(0), !maxDir}, upper{V(0), true};
    if (!prepared.spec.isReward()) {
        lower = {V(0), false};
        upper = {V(1), false};
    }
    std::string status = "iteration-limit";
    for (unsigned step = 1;; ++step) {
        auto iterStart = Clock::now();
        std::size_t budget = std::min(ExplorationBudget{std::min(step, 40u)}.maxStates(prepared.pomdp), config.maxStates);
        auto pessEx = exploreBeliefMdp(prepared, {budget, CutoffMode::PolicyBound, deadline}, pessimistic);
        auto optEx = exploreBeliefMdp(prepared, {budget, CutoffMode::MdpBound, deadline}, optimistic);
        CheckOptions one;
        one.precision = config.precision;
        auto pr = check(pessEx.mdp, checkKindOf(prepared.spec.kind), dir, one);
        auto orr = check(optEx.mdp, checkKindOf(prepared.spec.kind), dir, one);
        auto side = [](ValueResult<V> const& r, bool up) {
            return r.infinite[0] ? Extended<V>{V(0), true} : Extended<V>{up ? r.upper[0] : r.lower[0], false};
        };
        auto pess = side(pr, !maxDir);
        auto opt = side(orr, maxDir);
        Extended<V> iterLower = maxDir ? pess : opt;
        Extended<V> iterUpper = maxDir ? opt : pess;
        auto better = [](Extended<V> const& a, Extended<V> const& b, bool larger) {
            bool aLess = !a.infinite && (b.infinite || a.value < b.value);
            bool bLess = !b.infinite && (a.infinite || b.value < a.value);
            return larger ? (bLess ? a : b) : (aLess ? a : b);
        };
        lower = better(lower, iterLower, true);
        upper = better(upper, iterUpper, false);

        IterationRecord rec;
        rec.iteration = step;
        rec.states = pessEx.beliefOf.size();
        rec.explored = pessEx.expanded;
        rec.cutoffs = pessEx.frontier.size();
        rec.lower = asDouble(iterLower);
        rec.upper = asDouble(iterUpper);
        rec.bestLower = asDouble(lower);
        rec.bestUpper = asDouble(upper);
        rec.seconds = std::chrono::duration<double>(Clock::now() - iterStart).count();
        out.log.push_back(rec);
        record.iterations = step;
        record.states = rec.states;

        std::optional<bool> decided;
        if (prepared.spec.threshold) {
            decided = decideThreshold(*prepared.spec.threshold, lower, upper);
            record.threshold = thresholdText(decided);
        }
        if (decided) {
            status = "threshold-decided";
            break;
        }
        if (pessEx.complete && optEx.complete) {
            status = "exact";
            break;
        }
        if (relativeGap(lower, upper) <= config.gapTarget) {
            status = "gap-met";
            break;
        }
        if (Clock::now() > deadline) {
            status = "timeout";
            break;
        }
        if (config.maxIterations && step >= *config.maxIterations) {
            break;
        }
    }
    record.lower = asDouble(lower);
    record.upper = asDouble(upper);
    record.status = status;
    record.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    out.record = std::move(record);
    return out;
}

template<typename V>
RunOutput runTyped(RunConfig const& config, Problem<V> const& problem, RunRecord record) {
    if (config.mode == RunMode::BeliefExplore) {
        return runBeliefExplore(config, problem, std::move(record));
    }
    RefinementOptions<V> opts;
    opts.heuristic = config.heuristic;
    opts.timeLimit = config.timeLimit;
    opts.maxIterations = config.maxIterations;
    opts.gapTarget = config.gapTarget;
    opts.style = config.cutoffStyle;
    opts.precision = config.precision;
    opts.maxStates = config.maxStates;
    if (config.mode == RunMode::SingleShot) {
        opts.heuristic.etaInit = *config.resolution;
        opts.cutoff = CutoffPolicy::Never;
        opts.extendFoundation = false;
        opts.maxIterations = 1;
    }
    auto res = refinementLoop(problem, opts);
    RunOutput out;
    record.lower = asDouble(res.lower);
    record.upper = asDouble(res.upper);
    record.iterations = res.iterations;
    record.states = res.abstraction.mdp.numStates();
    record.seconds = res.seconds;
    record.status = std::string(toString(res.status));
    if (problem.spec.threshold) {
        record.threshold = thresholdText(res.thresholdHolds);
    }
    out.record = std::move(record);
    out.log = std::move(res.log);
    std::ostringstream text;
    writeAbstraction(text, res.abstraction, problem.pomdp.mdp().actionNames());
    out.abstraction = text.str();
    return out;
}

}  // namespace

RunOutput runProblem(RunConfig const& config, Problem<Rational> const& problem, std::string const& name) {
    config.validate();
    Problem<Rational> p = problem;
    if (config.threshold) {
        p.spec.threshold = parseThreshold(*config.threshold);
        validateSpecification(p.pomdp, p.spec);
    }
    RunRecord record;
    record.model = name;
    record.mode = std::string(toString(config.mode));
    record.heuristic = config.mode == RunMode::SingleShot ? "eta=" + std::to_string(*config.resolution)
                                                          : config.heuristic.name;
    record.arithmetic = config.arithmetic == Arithmetic::Exact ? "exact" : "float";
    if (config.arithmetic == Arithmetic::Exact) {
        return runTyped(config, p, std::move(record));
    }
    return runTyped(config, convertProblem<double>(p), std::move(record));
}

RunOutput run(RunConfig const& config, std::string const& modelPath) {
    config.validate();
    return runProblem(config, parseModelFile<Rational>(modelPath), modelPath);
}

int exitCodeFor(RunRecord const& record) { return record.threshold == "holds" ? 2 : 0; }

std::string const& csvHeader() {
    static std::string const header =
        "model,mode,heuristic,arithmetic,lower,upper,iterations,states,seconds,status,threshold";
    return header;
}

namespace {

std::string csvField(std::string const& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

std::string number(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parseNumber(std::string const& s) {
    if (s == "inf") {
        return kInfinity;
    }
    if (s == "-inf") {
        return -kInfinity;
    }
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) {
        throw std::runtime_error("bad number '" + s + "' in CSV");
    }
    return v;
}

std::vector<std::string> splitCsvLine(std::string const& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    if (quoted) {
        throw std::runtime_error("unterminated quote in CSV");
    }
    return fields;
}

}  // namespace

void writeCsvRow(std::ostream& out, RunRecord const& r) {
    out << csvField(r.model) << ',' << csvField(r.mode) << ',' << csvField(r.heuristic) << ',' << r.arithmetic << ','
        << number(r.lower) << ',' << number(r.upper) << ',' << r.iterations << ',' << r.states << ','
        << number(r.seconds) << ',' << r.status << ',' << r.threshold << '\n';
}

void writeCsv(std::ostream& out, std::vector<RunRecord> const& records) {
    out << csvHeader() << '\n';
    for (auto const& r : records) {
        writeCsvRow(out, r);
    }
}

std::vector<RunRecord> parseCsv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != csvHeader()) {
        throw std::runtime_error("CSV header mismatch");
    }
    std::vector<RunRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        auto f = splitCsvLine(line);
        if (f.size() != 11) {
            throw std::runtime_error("CSV row has " + std::to_string(f.size()) + " fields, expected 11");
        }
        RunRecord r;
        r.model = f[0];
        r.mode = f[1];
        r.heuristic = f[2];
        r.arithmetic = f[3];
        r.lower = parseNumber(f[4]);
        r.upper = parseNumber(f[5]);
        r.iterations = std::stoull(f[6]);
        r.states = std::stoull(f[7]);
        r.seconds = parseNumber(f[8]);
        r.status = f[9];
        r.threshold = f[10];
        out.push_back(std::move(r));
    }
    return out;
}

void writeIterationLog(std::ostream& out, std::vector<IterationRecord> const& log) {
    out << "iteration,states,explored,rewired,cutoffs,lower,upper,best_lower,best_upper,refined,seconds\n";
    for (auto const& r : log) {
        out << r.iteration << ',' << r.states << ',' << r.explored << ',' << r.rewired << ',' << r.cutoffs << ','
            << number(r.lower) << ',' << number(r.upper) << ',' << number(r.bestLower) << ','
            << number(r.bestUpper) << ',';
        for (std::size_t i = 0; i < r.refined.size(); ++i) {
            out << (i ? ";" : "") << r.refined[i].first << ':' << r.refined[i].second;
        }
        out << ',' << number(r.seconds) << '\n';
    }
}

// ---- generators ----

std::string_view toString(Family f) {
    switch (f) {
        case Family::GridAvoid: return "grid-avoid";
        case Family::MazeLike: return "maze-like";
        case Family::RefuelLite: return "refuel-lite";
        case Family::RocksLite: return "rocks-lite";
    }
    return "grid-avoid";
}

Family parseFamily(std::string_view text) {
    for (Family f : {Family::GridAvoid, Family::MazeLike, Family::RefuelLite, Family::RocksLite}) {
        if (toString(f) == text) {
            return f;
        }
    }
    throw std::invalid_argument("unknown benchmark family '" + std::string(text) + "'");
}

namespace {

using Key = std::vector<long>;
using Succ = std::vector<std::pair<Key, Rational>>;

struct Rules {
    std::vector<std::string> actions;
    Key initial;
    std::function<Succ(Key const&, ActionId)> next;
    std::function<Key(Key const&)> observe;
    std::function<bool(Key const&)> target;
    std::function<bool(Key const&)> avoid = [](Key const&) { return false; };
    std::function<Rational(Key const&, ActionId)> reward;
    ObjectiveKind kind = ObjectiveKind::ReachProbability;
    Direction direction = Direction::Max;
};

// Breadth-first over reachable keys; terminal keys become absorbing.
Problem<Rational> buildFromRules(Rules const& rules) {
    std::map<Key, StateId> ids;
    std::vector<Key> keys;
    auto idOf = [&](Key const& k) {
        auto [it, isNew] = ids.try_emplace(k, static_cast<StateId>(keys.size()));
        if (isNew) {
            keys.push_back(k);
        }
        return it->second;
    };
    idOf(rules.initial);
    std::vector<std::vector<std::pair<ActionId, Distribution<Rational>>>> rows;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        Key const k = keys[i];
        std::vector<std::pair<ActionId, Distribution<Rational>>> stateRows;
        bool terminal = rules.target(k) || rules.avoid(k);
        for (ActionId a = 0; a < rules.actions.size(); ++a) {
            Distribution<Rational> dist;
            if (terminal) {
                dist.push_back({static_cast<StateId>(i), Rational(1)});
            } else {
                for (auto const& [to, p] : rules.next(k, a)) {
                    dist.push_back({idOf(to), p});
                }
            }
            stateRows.push_back({a, std::move(dist)});
        }
        rows.push_back(std::move(stateRows));
    }
    std::size_t n = keys.size();
    Mdp<Rational> mdp(n, rules.actions, 0);
    for (StateId s = 0; s < n; ++s) {
        for (auto& [a, dist] : rows[s]) {
            mdp.setRow(s, a, std::move(dist));
        }
    }
    std::map<Key, ObsId> obsIds;
    std::vector<ObsId> obs(n);
    for (StateId s = 0; s < n; ++s) {
        obs[s] = obsIds.try_emplace(rules.observe(keys[s]), static_cast<ObsId>(obsIds.size())).first->second;
    }
    Specification<Rational> spec;
    spec.kind = rules.kind;
    spec.direction = rules.direction;
    for (StateId s = 0; s < n; ++s) {
        if (rules.target(keys[s])) {
            spec.target.push_back(s);
        } else if (rules.avoid(keys[s])) {
            spec.avoid.push_back(s);
        }
    }
    if (!spec.avoid.empty() && spec.kind == ObjectiveKind::ReachProbability) {
        spec.kind = ObjectiveKind::ReachAvoidProbability;
    }
    if (spec.kind == ObjectiveKind::TotalReward) {
        spec.rewards.assign(n, std::vector<Rational>(rules.actions.size(), Rational(0)));
        for (StateId s = 0; s < n; ++s) {
            if (rules.target(keys[s])) {
                continue;
            }
            for (ActionId a = 0; a < rules.actions.size(); ++a) {
                spec.rewards[s][a] = rules.reward(keys[s], a);
            }
        }
    }
    Problem<Rational> out{Pomdp<Rational>(std::move(mdp), std::move(obs), obsIds.size()), std::move(spec)};
    validateSpecification(out.pomdp, out.spec);
    return out;
}

// Merges duplicate successor keys.
Succ merged(Succ in) {
    std::map<Key, Rational> acc;
    for (auto& [k, p] : in) {
        acc[k] += p;
    }
    Succ out;
    for (auto& [k, p] : acc) {
        if (p != 0) {
            out.push_back({k, p});
        }
    }
    return out;
}

constexpr long kDx[4] = {0, 1, 0, -1};
constexpr long kDy[4] = {-1, 0, 1, 0};
std::vector<std::string> const kMoves{"north", "east", "south", "west"};

Rational checkedNoise(GenParams const& params) {
    Rational p = parseRational(params.noise);
    if (p < 0 || p >= 1) {
        throw std::invalid_argument("noise must lie in [0, 1)");
    }
    return p;
}

void requirePositive(GenParams const& params) {
    if (params.width == 0 || params.height == 0) {
        throw std::invalid_argument("sizes must be positive");
    }
}

// Agent and a randomly moving obstacle on a grid; the agent sees its cell and
// whether the obstacle is adjacent.
Problem<Rational> gridAvoid(GenParams const& params, std::mt19937_64& rng) {
    requirePositive(params);
    Rational slip = checkedNoise(params);
    long w = static_cast<long>(params.width), h = static_cast<long>(params.height);
    long cells = w * h, goal = cells - 1;
    constexpr long kGoal = -1, kCrash = -2;
    auto inside = [&](long x, long y) { return x >= 0 && y >= 0 && x < w && y < h; };
    auto moved = [&](long c, int d) {
        long x = c % w + kDx[d], y = c / w + kDy[d];
        return inside(x, y) ? x + y * w : c;
    };
    long obstacle = -1;
    if (cells > 2) {
        obstacle = 1 + static_cast<long>(rng() % static_cast<std::uint64_t>(cells - 2));
    }
    Rules rules;
    rules.actions = kMoves;
    rules.initial = cells == 1 ? Key{kGoal, 0} : Key{0, obstacle};
    rules.target = [](Key const& k) { return k[0] == kGoal; };
    rules.avoid = [](Key const& k) { return k[0] == kCrash; };
    rules.observe = [&, w](Key const& k) {
        if (k[0] < 0) {
            return Key{k[0]};
        }
        long near = 0;
        if (k[1] >= 0) {
            long dist = std::labs(k[0] % w - k[1] % w) + std::labs(k[0] / w - k[1] / w);
            near = dist <= 1;
        }
        return Key{k[0], near};
    };
    rules.next = [=](Key const& k, ActionId a) {
        Succ out;
        std::vector<std::pair<long, Rational>> agent{{moved(k[0], static_cast<int>(a)), Rational(1) - slip}};
        if (slip != 0) {
            agent.push_back({k[0], slip});
        }
        std::vector<long> obsMoves{k[1]};
        if (k[1] >= 0) {
            for (int d = 0; d < 4; ++d) {
                long m = moved(k[1], d);
                if (m != k[1]) {
                    obsMoves.push_back(m);
                }
            }
        }
        Rational share(1, static_cast<long>(obsMoves.size()));
        share.canonicalize();
        for (auto const& [pos, pa] : agent) {
            for (long o : obsMoves) {
                Key to = pos == goal ? Key{kGoal, 0} : (pos == o ? Key{kCrash, 0} : Key{pos, o});
                out.push_back({to, pa * share});
            }
        }
        return merged(std::move(out));
    };
    return buildFromRules(rules);
}

// Random perfect maze; uniform unknown start; observations are wall patterns;
// minimise expected steps to the goal corner.
Problem<Rational> mazeLike(GenParams const& params, std::mt19937_64& rng) {
    requirePositive(params);
    Rational slip = checkedNoise(params);
    long w = static_cast<long>(params.width), h = static_cast<long>(params.height);
    long cells = w * h, goal = cells - 1;
    // open[c][d]: passage from c in direction d
    std::vector<std::array<bool, 4>> open(static_cast<std::size_t>(cells), {false, false, false, false});
    std::vector<bool> seen(static_cast<std::size_t>(cells), false);
    std::vector<long> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
        long c = stack.back();
        std::vector<int> dirs;
        for (int d = 0; d < 4; ++d) {
            long x = c % w + kDx[d], y = c / w + kDy[d];
            if (x >= 0 && y >= 0 && x < w && y < h && !seen[static_cast<std::size_t>(x + y * w)]) {
                dirs.push_back(d);
            }
        }
        if (dirs.empty()) {
            stack.pop_back();
            continue;
        }
        int d = dirs[rng() % dirs.size()];
        long n = c % w + kDx[d] + (c / w + kDy[d]) * w;
        open[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] = true;
        open[static_cast<std::size_t>(n)][static_cast<std::size_t>((d + 2) % 4)] = true;
        seen[static_cast<std::size_t>(n)] = true;
        stack.push_back(n);
    }
    constexpr long kStart = -1;
    Rules rules;
    rules.actions = kMoves;
    rules.kind = ObjectiveKind::TotalReward;
    rules.direction = Direction::Min;
    rules.initial = cells == 1 ? Key{goal} : Key{kStart};
    rules.target = [=](Key const& k) { return k[0] == goal; };
    rules.observe = [=](Key const& k) {
        if (k[0] < 0 || k[0] == goal) {
            return Key{k[0] < 0 ? -1 : -2};
        }
        long mask = 0;
        for (int d = 0; d < 4; ++d) {
            mask |= open[static_cast<std::size_t>(k[0])][static_cast<std::size_t>(d)] ? (1L << d) : 0;
        }
        return Key{mask};
    };
    rules.next = [=](Key const& k, ActionId a) {
        Succ out;
        if (k[0] == kStart) {
            Rational share(1, goal);
            share.canonicalize();
            for (long c = 0; c < goal; ++c) {
                out.push_back({Key{c}, share});
            }
            return out;
        }
        bool can = open[static_cast<std::size_t>(k[0])][a];
        long to = can ? k[0] + kDx[a] + kDy[a] * w : k[0];
        out.push_back({Key{to}, can ? Rational(1) - slip : Rational(1)});
        if (can && slip != 0) {
            out.push_back({k, slip});
        }
        return merged(std::move(out));
    };
    rules.reward = [](Key const& k, ActionId) { return k[0] < 0 ? Rational(0) : Rational(1); };
    return buildFromRules(rules);
}

// A line with refuelling stations; position hidden, fuel level and station presence observed.
Problem<Rational> refuelLite(GenParams const& params, std::mt19937_64& rng) {
    requirePositive(params);
    if (params.capacity == 0) {
        throw std::invalid_argument("capacity must be positive");
    }
    Rational slip = checkedNoise(params);
    long len = static_cast<long>(params.width), cap = static_cast<long>(params.capacity), goal = len - 1;
    std::vector<bool> station(static_cast<std::size_t>(len), false);
    station[0] = true;
    for (long p = 1; p < goal; ++p) {
        station[static_cast<std::size_t>(p)] = rng() % 3 == 0;
    }
    constexpr long kGoal = -1, kEmpty = -2;
    Rules rules;
    rules.actions = {"left", "right", "refuel"};
    rules.initial = len == 1 ? Key{kGoal, 0} : Key{0, cap};
    rules.target = [](Key const& k) { return k[0] == kGoal; };
    rules.avoid = [](Key const& k) { return k[0] == kEmpty; };
    rules.observe = [=](Key const& k) {
        if (k[0] < 0) {
            return Key{k[0], 0, 0};
        }
        return Key{0, k[1], station[static_cast<std::size_t>(k[0])] ? 1L : 0L};
    };
    auto place = [=](long pos, long fuel) {
        if (pos == goal) {
            return Key{kGoal, 0};
        }
        if (fuel == 0 && !station[static_cast<std::size_t>(pos)]) {
            return Key{kEmpty, 0};
        }
        return Key{pos, fuel};
    };
    rules.next = [=](Key const& k, ActionId a) {
        long pos = k[0], fuel = k[1];
        if (a == 2) {
            return Succ{{Key{pos, station[static_cast<std::size_t>(pos)] ? cap : fuel}, Rational(1)}};
        }
        if (fuel == 0) {
            return Succ{{k, Rational(1)}};
        }
        long to = std::clamp(pos + (a == 0 ? -1L : 1L), 0L, goal);
        Succ out{{place(to, fuel - 1), Rational(1) - slip}};
        if (slip != 0) {
            out.push_back({place(pos, fuel - 1), slip});
        }
        return merged(std::move(out));
    };
    return buildFromRules(rules);
}

// Rocks of unknown quality on a line; noisy checks, sampling a bad rock fails,
// reach the exit with a good sample.
Problem<Rational> rocksLite(GenParams const& params, std::mt19937_64& rng) {
    requirePositive(params);
    Rational noise = checkedNoise(params);
    long len = static_cast<long>(params.width);
    long exitPos = len - 1;
    std::size_t k = std::min<std::size_t>(params.rocks, static_cast<std::size_t>(std::max(0L, len - 1)));
    std::vector<long> spots;
    for (long p = 0; p < exitPos; ++p) {
        spots.push_back(p);
    }
    std::shuffle(spots.begin(), spots.end(), rng);
    spots.resize(k);
    std::sort(spots.begin(), spots.end());
    auto rockAt = [=](long pos) -> long {
        auto it = std::find(spots.begin(), spots.end(), pos);
        return it == spots.end() ? -1 : static_cast<long>(it - spots.begin());
    };
    constexpr long kStart = -1, kDone = -2, kTrap = -3;
    // key: pos, qualities, collected, reading (0 none, 1 good, 2 bad)
    Rules rules;
    rules.actions = {"left", "right", "sample", "check"};
    rules.initial = Key{kStart, 0, 0, 0};
    rules.target = [](Key const& key) { return key[0] == kDone; };
    rules.avoid = [](Key const& key) { return key[0] == kTrap; };
    rules.observe = [](Key const& key) {
        if (key[0] < 0) {
            return Key{key[0]};
        }
        return Key{key[0], key[2], key[3]};
    };
    auto at = [=](long pos, long q, long collected, long reading) {
        if (pos == exitPos && collected == 1) {
            return Key{kDone, 0, 0, 0};
        }
        return Key{pos, q, collected, reading};
    };
    rules.next = [=](Key const& key, ActionId a) {
        if (key[0] == kStart) {
            Succ out;
            long combos = 1L << k;
            Rational share(1, combos);
            share.canonicalize();
            for (long q = 0; q < combos; ++q) {
                out.push_back({at(0, q, 0, 0), share});
            }
            return out;
        }
        long pos = key[0], q = key[1], collected = key[2];
        long rock = rockAt(pos);
        switch (a) {
            case 0:
            case 1: {
                long to = std::clamp(pos + (a == 0 ? -1L : 1L), 0L, exitPos);
                return Succ{{at(to, q, collected, 0), Rational(1)}};
            }
            case 2: {
                if (rock < 0) {
                    return Succ{{at(pos, q, collected, 0), Rational(1)}};
                }
                if ((q >> rock) & 1L) {
                    // a sampled rock is used up
                    return Succ{{at(pos, q & ~(1L << rock), 1, 0), Rational(1)}};
                }
                return Succ{{Key{kTrap, 0, 0, 0}, Rational(1)}};
            }
            default: {
                if (rock < 0) {
                    return Succ{{at(pos, q, collected, 0), Rational(1)}};
                }
                long truth = ((q >> rock) & 1L) ? 1 : 2;
                Succ out{{at(pos, q, collected, truth), Rational(1) - noise}};
                if (noise != 0) {
                    out.push_back({at(pos, q, collected, 3 - truth), noise});
                }
                return merged(std::move(out));
            }
        }
    };
    return buildFromRules(rules);
}

}  // namespace

Problem<Rational> generateProblem(Family family, GenParams const& params, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    switch (family) {
        case Family::GridAvoid: return gridAvoid(params, rng);
        case Family::MazeLike: return mazeLike(params, rng);
        case Family::RefuelLite: return refuelLite(params, rng);
        case Family::RocksLite: return rocksLite(params, rng);
    }
    throw std::invalid_argument("unknown family");
}

std::string generateBenchmark(Family family, GenParams const& params, std::uint64_t seed) {
    std::ostringstream out;
    out << "# " << toString(family) << " width=" << params.width << " height=" << params.height
        << " capacity=" << params.capacity << " rocks=" << params.rocks << " noise=" << params.noise
        << " seed=" << seed << '\n';
    out << writeModel(generateProblem(family, params, seed));
    return out.str();
}

}  // namespace pomdpv
