#include "pomdpv/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace pomdpv {

ParseError::ParseError(std::size_t line, std::size_t column, std::string const& message)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

template<typename ValueType>
Mdp<ValueType>::Mdp(std::size_t numStates, std::vector<std::string> actionNames, StateId initial)
    : actionNames_(std::move(actionNames)), rows_(numStates), initial_(initial) {}

template<typename ValueType>
std::optional<ActionId> Mdp<ValueType>::actionByName(std::string_view name) const {
    for (std::size_t i = 0; i < actionNames_.size(); ++i) {
        if (actionNames_[i] == name) {
            return static_cast<ActionId>(i);
        }
    }
    return std::nullopt;
}

template<typename ValueType>
Distribution<ValueType> const* Mdp<ValueType>::row(StateId s, ActionId a) const {
    for (auto const& r : rows_[s]) {
        if (r.action == a) {
            return &r.dist;
        }
    }
    return nullptr;
}

template<typename ValueType>
void Mdp<ValueType>::setRow(StateId s, ActionId a, Distribution<ValueType> dist) {
    std::sort(dist.begin(), dist.end(), [](auto const& x, auto const& y) { return x.state < y.state; });
    if constexpr (NumTraits<ValueType>::exact) {
        for (auto& e : dist) {
            e.prob.canonicalize();
        }
    }
    Distribution<ValueType> merged;
    for (auto& e : dist) {
        if (!merged.empty() && merged.back().state == e.state) {
            merged.back().prob += e.prob;
        } else {
            merged.push_back(std::move(e));
        }
    }
    std::erase_if(merged, [](auto const& e) { return isZero(e.prob); });
    auto& rs = rows_[s];
    auto it = std::lower_bound(rs.begin(), rs.end(), a, [](auto const& r, ActionId x) { return r.action < x; });
    if (it != rs.end() && it->action == a) {
        it->dist = std::move(merged);
    } else {
        rs.insert(it, ActionRow<ValueType>{a, std::move(merged)});
    }
}

template<typename ValueType>
void Mdp<ValueType>::validate() const {
    if (rows_.empty()) {
        throw ModelError("model has no states");
    }
    if (initial_ >= rows_.size()) {
        throw ModelError("initial state " + std::to_string(initial_) + " out of range");
    }
    for (std::size_t s = 0; s < rows_.size(); ++s) {
        if (rows_[s].empty()) {
            throw ModelError("state " + std::to_string(s) + " has no enabled action");
        }
        for (auto const& r : rows_[s]) {
            if (r.action >= actionNames_.size()) {
                throw ModelError("action id out of range at state " + std::to_string(s));
            }
            ValueType sum = 0;
            for (std::size_t i = 0; i < r.dist.size(); ++i) {
                auto const& e = r.dist[i];
                if (e.state >= rows_.size()) {
                    throw ModelError("dangling state id " + std::to_string(e.state) + " in row of state " +
                                     std::to_string(s));
                }
                if (i > 0 && r.dist[i - 1].state >= e.state) {
                    throw ModelError("unsorted row at state " + std::to_string(s));
                }
                if (!(e.prob > 0) || e.prob > 1) {
                    throw ModelError("probability out of (0,1] at state " + std::to_string(s));
                }
                sum += e.prob;
            }
            if (!isOne(sum)) {
                throw ModelError("row of state " + std::to_string(s) + " action " + actionNames_[r.action] +
                                 " sums to " + toString(sum) + ", not 1");
            }
        }
    }
}

template<typename ValueType>
Pomdp<ValueType>::Pomdp(Mdp<ValueType> mdp, std::vector<ObsId> obsOf, std::size_t numObservations)
    : mdp_(std::move(mdp)), obsOf_(std::move(obsOf)), classes_(numObservations), enabled_(numObservations) {
    mdp_.validate();
    if (obsOf_.size() != mdp_.numStates()) {
        throw ModelError("observation map is not total");
    }
    for (StateId s = 0; s < obsOf_.size(); ++s) {
        if (obsOf_[s] >= numObservations) {
            throw ModelError("observation id " + std::to_string(obsOf_[s]) + " out of range at state " +
                             std::to_string(s));
        }
        classes_[obsOf_[s]].push_back(s);
    }
    for (ObsId z = 0; z < numObservations; ++z) {
        if (classes_[z].empty()) {
            continue;
        }
        auto actionsOf = [&](StateId s) {
            std::vector<ActionId> as;
            for (auto const& r : mdp_.rows(s)) {
                as.push_back(r.action);
            }
            return as;
        };
        enabled_[z] = actionsOf(classes_[z].front());
        for (StateId s : classes_[z]) {
            if (actionsOf(s) != enabled_[z]) {
                throw ModelError("states " + std::to_string(classes_[z].front()) + " and " + std::to_string(s) +
                                 " share observation " + std::to_string(z) + " but enable different actions");
            }
        }
    }
}

template<typename ValueType>
std::size_t Pomdp<ValueType>::maxClassSize() const {
    std::size_t m = 0;
    for (auto const& c : classes_) {
        m = std::max(m, c.size());
    }
    return m;
}

namespace {

std::vector<bool> maskOf(std::vector<StateId> const& states, std::size_t n) {
    std::vector<bool> mask(n, false);
    for (StateId s : states) {
        if (s < n) {
            mask[s] = true;
        }
    }
    return mask;
}

}  // namespace

template<typename ValueType>
std::vector<bool> Specification<ValueType>::targetMask(std::size_t numStates) const {
    return maskOf(target, numStates);
}

template<typename ValueType>
std::vector<bool> Specification<ValueType>::avoidMask(std::size_t numStates) const {
    return maskOf(avoid, numStates);
}

template<typename ValueType>
void validateSpecification(Pomdp<ValueType> const& pomdp, Specification<ValueType> const& spec) {
    std::size_t n = pomdp.numStates();
    if (spec.target.empty()) {
        throw ModelError("target set is empty");
    }
    for (auto const* set : {&spec.target, &spec.avoid}) {
        for (std::size_t i = 0; i < set->size(); ++i) {
            if ((*set)[i] >= n) {
                throw ModelError("dangling state id " + std::to_string((*set)[i]) + " in label");
            }
            if (i > 0 && (*set)[i - 1] >= (*set)[i]) {
                throw ModelError("label set not strictly sorted");
            }
        }
    }
    auto avoid = spec.avoidMask(n);
    for (StateId s : spec.target) {
        if (avoid[s]) {
            throw ModelError("state " + std::to_string(s) + " is both target and avoid");
        }
    }
    if (spec.kind != ObjectiveKind::ReachAvoidProbability && !spec.avoid.empty()) {
        throw ModelError("avoid states need a reach-avoid objective");
    }
    if (spec.isReward()) {
        if (spec.rewards.size() != n) {
            throw ModelError("reward table does not cover all states");
        }
        for (StateId s = 0; s < n; ++s) {
            if (spec.rewards[s].size() != pomdp.numActions()) {
                throw ModelError("reward table has wrong width");
            }
            for (ActionId a = 0; a < pomdp.numActions(); ++a) {
                if (spec.rewards[s][a] < 0) {
                    throw ModelError("negative reward at state " + std::to_string(s));
                }
                if (!isZero(spec.rewards[s][a]) && !pomdp.mdp().enabled(s, a)) {
                    throw ModelError("reward on disabled action at state " + std::to_string(s));
                }
            }
        }
    } else if (!spec.rewards.empty()) {
        throw ModelError("rewards given for a probability objective");
    }
    if (spec.threshold && !spec.isReward()) {
        auto const& v = spec.threshold->value;
        if (!(v > 0 && v < 1)) {
            throw ModelError("probability threshold must lie in (0,1)");
        }
    }
    if (spec.threshold && spec.isReward() && spec.threshold->value < 0) {
        throw ModelError("reward threshold must be nonnegative");
    }
}

namespace {

struct Token {
    std::string_view text;
    std::size_t column;
};

std::vector<Token> tokenize(std::string_view line) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        if (line[i] == '#') {
            break;
        }
        if (line[i] == ' ' || line[i] == '\t' || line[i] == '\r') {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r' && line[i] != '#') {
            ++i;
        }
        tokens.push_back({line.substr(start, i - start), start + 1});
    }
    return tokens;
}

class Parser {
public:
    // Rows off by at most rowTolerance are rescaled (float loading of rounded decimals).
    Parser(std::string_view text, double rowTolerance) : text_(text), rowTolerance_(rowTolerance) {}

    Problem<Rational> run() {
        std::size_t lineNo = 0;
        std::size_t pos = 0;
        while (pos <= text_.size()) {
            auto end = text_.find('\n', pos);
            if (end == std::string_view::npos) {
                end = text_.size();
            }
            ++lineNo;
            line_ = lineNo;
            auto tokens = tokenize(text_.substr(pos, end - pos));
            if (!tokens.empty()) {
                handle(tokens);
            }
            pos = end + 1;
        }
        return finish();
    }

private:
    [[noreturn]] void fail(Token const& t, std::string const& message) const {
        throw ParseError(line_, t.column, message);
    }

    [[noreturn]] void semantic(Token const& t, std::string const& message) const {
        throw ModelError("line " + std::to_string(line_) + ", column " + std::to_string(t.column) + ": " + message);
    }

    std::uint64_t integer(Token const& t) const {
        if (t.text.empty() || t.text.size() > 18 ||
            !std::all_of(t.text.begin(), t.text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            fail(t, "expected a nonnegative integer, got '" + std::string(t.text) + "'");
        }
        return std::stoull(std::string(t.text));
    }

    StateId state(Token const& t) const {
        auto v = integer(t);
        if (v >= numStates_) {
            semantic(t, "state id " + std::to_string(v) + " out of range");
        }
        return static_cast<StateId>(v);
    }

    Rational number(Token const& t) const {
        try {
            return parseRational(t.text);
        } catch (std::invalid_argument const& e) {
            fail(t, std::string(e.what()) + " '" + std::string(t.text) + "'");
        }
    }

    ActionId action(Token const& t) {
        std::string name(t.text);
        auto it = actionIds_.find(name);
        if (it != actionIds_.end()) {
            return it->second;
        }
        if (actionNames_.size() >= numActions_) {
            fail(t, "more than " + std::to_string(numActions_) + " distinct actions");
        }
        ActionId id = static_cast<ActionId>(actionNames_.size());
        actionNames_.push_back(name);
        actionIds_.emplace(name, id);
        return id;
    }

    void arity(std::vector<Token> const& tokens, std::size_t n) const {
        if (tokens.size() != n) {
            fail(tokens.front(), "'" + std::string(tokens.front().text) + "' expects " + std::to_string(n - 1) +
                                     " arguments");
        }
    }

    void handle(std::vector<Token> const& tokens) {
        auto const& kw = tokens.front();
        if (!haveHeader_) {
            if (kw.text != "pomdp") {
                fail(kw, "expected header 'pomdp <nStates> <nActions> <nObs>'");
            }
            arity(tokens, 4);
            numStates_ = integer(tokens[1]);
            numActions_ = integer(tokens[2]);
            numObs_ = integer(tokens[3]);
            if (numStates_ == 0) {
                fail(tokens[1], "model needs at least one state");
            }
            if (numStates_ > (1ULL << 31) || numActions_ > (1ULL << 20) || numObs_ > (1ULL << 31)) {
                fail(tokens[1], "model dimensions too large");
            }
            obs_.assign(numStates_, std::nullopt);
            haveHeader_ = true;
            return;
        }
        if (kw.text == "pomdp") {
            fail(kw, "duplicate header");
        } else if (kw.text == "action") {
            for (std::size_t i = 1; i < tokens.size(); ++i) {
                action(tokens[i]);
            }
        } else if (kw.text == "init") {
            arity(tokens, 2);
            if (initial_) {
                fail(kw, "duplicate init");
            }
            initial_ = state(tokens[1]);
        } else if (kw.text == "obs") {
            arity(tokens, 3);
            StateId s = state(tokens[1]);
            auto z = integer(tokens[2]);
            if (z >= numObs_) {
                semantic(tokens[2], "observation id " + std::to_string(z) + " out of range");
            }
            if (obs_[s]) {
                fail(kw, "duplicate observation for state " + std::to_string(s));
            }
            obs_[s] = static_cast<ObsId>(z);
        } else if (kw.text == "tr") {
            arity(tokens, 5);
            StateId s = state(tokens[1]);
            ActionId a = action(tokens[2]);
            StateId t = state(tokens[3]);
            Rational p = number(tokens[4]);
            if (p < 0 || p > 1) {
                fail(tokens[4], "probability out of [0,1]");
            }
            auto& dist = rows_[{s, a}];
            for (auto const& e : dist) {
                if (e.state == t) {
                    fail(tokens[3], "duplicate transition");
                }
            }
            dist.push_back({t, p});
        } else if (kw.text == "label") {
            if (tokens.size() < 3) {
                fail(kw, "label needs a name and at least one state");
            }
            std::vector<StateId>* set = nullptr;
            if (tokens[1].text == "target") {
                set = &target_;
            } else if (tokens[1].text == "avoid") {
                set = &avoid_;
            } else {
                fail(tokens[1], "unknown label '" + std::string(tokens[1].text) + "'");
            }
            for (std::size_t i = 2; i < tokens.size(); ++i) {
                set->push_back(state(tokens[i]));
            }
        } else if (kw.text == "rew") {
            arity(tokens, 4);
            StateId s = state(tokens[1]);
            ActionId a = action(tokens[2]);
            Rational r = number(tokens[3]);
            if (r < 0) {
                fail(tokens[3], "negative reward");
            }
            if (!rewards_.emplace(std::make_pair(s, a), r).second) {
                fail(kw, "duplicate reward");
            }
        } else if (kw.text == "spec") {
            if (spec_) {
                fail(kw, "duplicate spec");
            }
            if (tokens.size() != 3 && tokens.size() != 5) {
                fail(kw, "spec expects '<max|min> <Preach|Preachavoid|Rtotal> [<=|>= value]'");
            }
            Specification<Rational> spec;
            if (tokens[1].text == "max") {
                spec.direction = Direction::Max;
            } else if (tokens[1].text == "min") {
                spec.direction = Direction::Min;
            } else {
                fail(tokens[1], "expected max or min");
            }
            if (tokens[2].text == "Preach") {
                spec.kind = ObjectiveKind::ReachProbability;
            } else if (tokens[2].text == "Preachavoid") {
                spec.kind = ObjectiveKind::ReachAvoidProbability;
            } else if (tokens[2].text == "Rtotal") {
                spec.kind = ObjectiveKind::TotalReward;
            } else {
                fail(tokens[2], "expected Preach, Preachavoid or Rtotal");
            }
            if (tokens.size() == 5) {
                Comparison cmp;
                if (tokens[3].text == "<=") {
                    cmp = Comparison::LessEqual;
                } else if (tokens[3].text == ">=") {
                    cmp = Comparison::GreaterEqual;
                } else {
                    fail(tokens[3], "expected <= or >=");
                }
                spec.threshold = Threshold<Rational>{cmp, number(tokens[4])};
            }
            spec_ = spec;
        } else {
            fail(kw, "unknown keyword '" + std::string(kw.text) + "'");
        }
    }

    Problem<Rational> finish() {
        if (!haveHeader_) {
            throw ParseError(line_, 1, "missing header");
        }
        if (!initial_) {
            throw ParseError(line_, 1, "missing init");
        }
        if (!spec_) {
            throw ParseError(line_, 1, "missing spec");
        }
        std::vector<ObsId> obsOf(numStates_);
        for (std::size_t s = 0; s < numStates_; ++s) {
            if (!obs_[s]) {
                throw ModelError("state " + std::to_string(s) + " has no observation");
            }
            obsOf[s] = *obs_[s];
        }
        while (actionNames_.size() < numActions_) {
            actionNames_.push_back("act" + std::to_string(actionNames_.size()));
        }
        Mdp<Rational> mdp(numStates_, actionNames_, *initial_);
        for (auto& [key, dist] : rows_) {
            if (rowTolerance_ > 0) {
                Rational sum = 0;
                for (auto const& e : dist) {
                    sum += e.prob;
                }
                if (sum != 1 && sum > 0 && std::fabs(toDouble(sum) - 1.0) <= rowTolerance_) {
                    for (auto& e : dist) {
                        e.prob /= sum;
                    }
                }
            }
            mdp.setRow(key.first, key.second, std::move(dist));
        }
        Pomdp<Rational> pomdp(std::move(mdp), std::move(obsOf), numObs_);
        Specification<Rational> spec = *spec_;
        std::sort(target_.begin(), target_.end());
        target_.erase(std::unique(target_.begin(), target_.end()), target_.end());
        std::sort(avoid_.begin(), avoid_.end());
        avoid_.erase(std::unique(avoid_.begin(), avoid_.end()), avoid_.end());
        spec.target = target_;
        spec.avoid = avoid_;
        if (spec.isReward()) {
            spec.rewards.assign(numStates_, std::vector<Rational>(numActions_, Rational(0)));
            for (auto const& [key, r] : rewards_) {
                spec.rewards[key.first][key.second] = r;
            }
        } else if (!rewards_.empty()) {
            throw ModelError("rewards given for a probability objective");
        }
        validateSpecification(pomdp, spec);
        return {std::move(pomdp), std::move(spec)};
    }

    std::string_view text_;
    double rowTolerance_ = 0.0;
    std::size_t line_ = 0;
    bool haveHeader_ = false;
    std::uint64_t numStates_ = 0, numActions_ = 0, numObs_ = 0;
    std::optional<StateId> initial_;
    std::vector<std::optional<ObsId>> obs_;
    std::vector<std::string> actionNames_;
    std::map<std::string, ActionId> actionIds_;
    std::map<std::pair<StateId, ActionId>, Distribution<Rational>> rows_;
    std::vector<StateId> target_, avoid_;
    std::map<std::pair<StateId, ActionId>, Rational> rewards_;
    std::optional<Specification<Rational>> spec_;
};

}  // namespace

Problem<Rational> parseModelExact(std::string_view text) {
    return Parser(text, 0.0).run();
}

template<typename To, typename From>
Problem<To> convertProblem(Problem<From> const& problem) {
    auto conv = [](From const& v) { return fromRational<To>(toRational(v)); };
    auto const& src = problem.pomdp.mdp();
    Mdp<To> mdp(src.numStates(), src.actionNames(), src.initialState());
    for (StateId s = 0; s < src.numStates(); ++s) {
        for (auto const& r : src.rows(s)) {
            Distribution<To> d;
            d.reserve(r.dist.size());
            for (auto const& e : r.dist) {
                d.push_back({e.state, conv(e.prob)});
            }
            mdp.setRow(s, r.action, std::move(d));
        }
    }
    Pomdp<To> pomdp(std::move(mdp), problem.pomdp.observations(), problem.pomdp.numObservations());
    Specification<To> spec;
    spec.kind = problem.spec.kind;
    spec.direction = problem.spec.direction;
    spec.target = problem.spec.target;
    spec.avoid = problem.spec.avoid;
    for (auto const& row : problem.spec.rewards) {
        std::vector<To> out;
        for (auto const& v : row) {
            out.push_back(conv(v));
        }
        spec.rewards.push_back(std::move(out));
    }
    if (problem.spec.threshold) {
        spec.threshold = Threshold<To>{problem.spec.threshold->comparison, conv(problem.spec.threshold->value)};
    }
    return {std::move(pomdp), std::move(spec)};
}

template<typename ValueType>
Problem<ValueType> parseModel(std::string_view text) {
    if constexpr (NumTraits<ValueType>::exact) {
        return parseModelExact(text);
    } else {
        return convertProblem<ValueType>(Parser(text, NumTraits<ValueType>::sumTolerance).run());
    }
}

template<typename ValueType>
Problem<ValueType> parseModelFile(std::string const& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open model file '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parseModel<ValueType>(buf.str());
}

template<typename ValueType>
std::string writeModel(Problem<ValueType> const& problem) {
    auto const& pomdp = problem.pomdp;
    auto const& mdp = pomdp.mdp();
    auto const& spec = problem.spec;
    std::ostringstream out;
    out << "pomdp " << pomdp.numStates() << ' ' << pomdp.numActions() << ' ' << pomdp.numObservations() << '\n';
    out << "action";
    for (auto const& name : mdp.actionNames()) {
        out << ' ' << name;
    }
    out << '\n';
    out << "init " << mdp.initialState() << '\n';
    for (StateId s = 0; s < pomdp.numStates(); ++s) {
        out << "obs " << s << ' ' << pomdp.observation(s) << '\n';
    }
    for (StateId s = 0; s < pomdp.numStates(); ++s) {
        for (auto const& r : mdp.rows(s)) {
            for (auto const& e : r.dist) {
                out << "tr " << s << ' ' << mdp.actionName(r.action) << ' ' << e.state << ' ' << toString(e.prob)
                    << '\n';
            }
        }
    }
    out << "label target";
    for (StateId s : spec.target) {
        out << ' ' << s;
    }
    out << '\n';
    if (!spec.avoid.empty()) {
        out << "label avoid";
        for (StateId s : spec.avoid) {
            out << ' ' << s;
        }
        out << '\n';
    }
    for (StateId s = 0; s < spec.rewards.size(); ++s) {
        for (ActionId a = 0; a < spec.rewards[s].size(); ++a) {
            if (!isZero(spec.rewards[s][a])) {
                out << "rew " << s << ' ' << mdp.actionName(a) << ' ' << toString(spec.rewards[s][a]) << '\n';
            }
        }
    }
    out << "spec " << (spec.direction == Direction::Max ? "max" : "min") << ' ';
    switch (spec.kind) {
        case ObjectiveKind::ReachProbability: out << "Preach"; break;
        case ObjectiveKind::ReachAvoidProbability: out << "Preachavoid"; break;
        case ObjectiveKind::TotalReward: out << "Rtotal"; break;
    }
    if (spec.threshold) {
        out << ' ' << (spec.threshold->comparison == Comparison::LessEqual ? "<=" : ">=") << ' '
            << toString(spec.threshold->value);
    }
    out << '\n';
    return out.str();
}

Problem<Rational> makeRunningExample() {
    using namespace running;
    Mdp<Rational> mdp(9, {"a", "b"}, s0);
    auto q = [](long n, long d) { return Rational(n, d); };
    mdp.setRow(s0, a, {{s0, q(1, 5)}, {s1, q(3, 5)}, {s2, q(1, 5)}});
    mdp.setRow(s0, b, {{s0, q(1, 2)}, {s5, q(1, 6)}, {s6, q(1, 3)}});
    mdp.setRow(s5, a, {{s1, q(1, 1)}});
    mdp.setRow(s5, b, {{s5, q(1, 4)}, {s6, q(3, 4)}});
    mdp.setRow(s6, a, {{s2, q(1, 1)}});
    mdp.setRow(s6, b, {{s5, q(2, 3)}, {s6, q(1, 3)}});
    mdp.setRow(s1, a, {{s3, q(1, 1)}});
    mdp.setRow(s1, b, {{s3, q(2, 3)}, {s4, q(1, 3)}});
    mdp.setRow(s2, a, {{s3, q(3, 4)}, {s4, q(1, 4)}});
    mdp.setRow(s2, b, {{s4, q(1, 1)}});
    mdp.setRow(s3, a, {{smile, q(2, 5)}, {frown, q(3, 5)}});
    mdp.setRow(s3, b, {{smile, q(1, 1)}});
    mdp.setRow(s4, a, {{smile, q(3, 4)}, {frown, q(1, 4)}});
    mdp.setRow(s4, b, {{frown, q(1, 1)}});
    for (StateId sink : {smile, frown}) {
        mdp.setRow(sink, a, {{sink, q(1, 1)}});
        mdp.setRow(sink, b, {{sink, q(1, 1)}});
    }
    std::vector<ObsId> obs = {0, 1, 1, 2, 2, 0, 0, 3, 4};
    Pomdp<Rational> pomdp(std::move(mdp), std::move(obs), 5);
    Specification<Rational> spec;
    spec.kind = ObjectiveKind::ReachProbability;
    spec.direction = Direction::Max;
    spec.target = {frown};
    return {std::move(pomdp), std::move(spec)};
}

namespace {

// True if `set` is a union of observation classes.
template<typename ValueType>
bool unionOfClasses(Pomdp<ValueType> const& pomdp, std::vector<bool> const& set) {
    for (StateId s = 0; s < pomdp.numStates(); ++s) {
        if (!set[s]) {
            continue;
        }
        for (StateId t : pomdp.obsClass(pomdp.observation(s))) {
            if (!set[t]) {
                return false;
            }
        }
    }
    return true;
}

template<typename ValueType>
bool absorbing(Mdp<ValueType> const& mdp, StateId s) {
    for (auto const& r : mdp.rows(s)) {
        if (r.dist.size() != 1 || r.dist.front().state != s) {
            return false;
        }
    }
    return true;
}

}  // namespace

template<typename ValueType>
Problem<ValueType> prepareProblem(Problem<ValueType> const& problem) {
    auto const& pomdp = problem.pomdp;
    std::size_t n = pomdp.numStates();
    std::vector<std::vector<bool>> groups;
    groups.push_back(problem.spec.targetMask(n));
    if (!problem.spec.avoid.empty()) {
        groups.push_back(problem.spec.avoidMask(n));
    }
    bool needed = false;
    for (auto const& g : groups) {
        if (!unionOfClasses(pomdp, g)) {
            needed = true;
        }
        for (StateId s = 0; s < n; ++s) {
            if (g[s] && !absorbing(pomdp.mdp(), s)) {
                needed = true;
            }
        }
    }
    bool rewardsOnTargets = false;
    if (problem.spec.isReward()) {
        for (StateId s : problem.spec.target) {
            for (auto const& r : problem.spec.rewards[s]) {
                rewardsOnTargets = rewardsOnTargets || !isZero(r);
            }
        }
    }
    if (!needed && !rewardsOnTargets) {
        return problem;
    }
    Mdp<ValueType> mdp = pomdp.mdp();
    std::vector<ObsId> obs = pomdp.observations();
    std::size_t numObs = pomdp.numObservations();
    for (auto const& g : groups) {
        bool own = unionOfClasses(pomdp, g);
        ObsId fresh = static_cast<ObsId>(numObs);
        if (!own) {
            ++numObs;
        }
        for (StateId s = 0; s < n; ++s) {
            if (!g[s]) {
                continue;
            }
            if (own) {
                // keep the enabled set so the class stays consistent
                for (auto const& r : pomdp.mdp().rows(s)) {
                    mdp.setRow(s, r.action, {{s, ValueType(1)}});
                }
            } else {
                mdp.clearRows(s);
                mdp.setRow(s, 0, {{s, ValueType(1)}});
                obs[s] = fresh;
            }
        }
    }
    Problem<ValueType> out{Pomdp<ValueType>(std::move(mdp), std::move(obs), numObs), problem.spec};
    if (out.spec.isReward()) {
        for (StateId s : out.spec.target) {
            for (auto& r : out.spec.rewards[s]) {
                r = 0;
            }
        }
    }
    validateSpecification(out.pomdp, out.spec);
    return out;
}

template class Mdp<double>;
template class Mdp<Rational>;
template class Pomdp<double>;
template class Pomdp<Rational>;
template struct Specification<double>;
template struct Specification<Rational>;
template void validateSpecification(Pomdp<double> const&, Specification<double> const&);
template void validateSpecification(Pomdp<Rational> const&, Specification<Rational> const&);
template Problem<double> parseModel<double>(std::string_view);
template Problem<Rational> parseModel<Rational>(std::string_view);
template Problem<double> parseModelFile<double>(std::string const&);
template Problem<Rational> parseModelFile<Rational>(std::string const&);
template std::string writeModel(Problem<double> const&);
template std::string writeModel(Problem<Rational> const&);
template Problem<double> convertProblem<double, Rational>(Problem<Rational> const&);
template Problem<Rational> convertProblem<Rational, double>(Problem<double> const&);
template Problem<double> convertProblem<double, double>(Problem<double> const&);
template Problem<Rational> convertProblem<Rational, Rational>(Problem<Rational> const&);
template Problem<double> prepareProblem(Problem<double> const&);
template Problem<Rational> prepareProblem(Problem<Rational> const&);

}  // namespace pomdpv
