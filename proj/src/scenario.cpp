#include "reflectlab/scenario.hpp"

#include "reflectlab/errors.hpp"
#include "reflectlab/separation.hpp"

#include <charconv>
#include <map>
#include <random>
#include <sstream>

namespace reflectlab {

namespace {

struct Token {
    std::string text;
    std::size_t column = 0;  // 1-based
};

struct Entry {
    std::string key;
    std::vector<Token> tokens;
    std::size_t line = 0;
    std::size_t key_column = 0;
    std::size_t value_column = 0;
};

using Section = std::vector<Entry>;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::vector<Token> split_tokens(std::string_view text, std::size_t first_column) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        const std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i > start) out.push_back({std::string(text.substr(start, i - start)), first_column + start});
    }
    return out;
}

class Reader {
  public:
    explicit Reader(const Entry& e) : e_(e) {}

    [[noreturn]] void fail(std::size_t column, const std::string& message) const {
        throw ParseError(e_.line, column, e_.key + ": " + message);
    }

    const Token& token(std::size_t i) const {
        if (i >= e_.tokens.size()) fail(end_column(), "missing value");
        return e_.tokens[i];
    }

    std::size_t size() const { return e_.tokens.size(); }

    void expect_count(std::size_t n) const {
        if (e_.tokens.size() > n) fail(e_.tokens[n].column, "unexpected extra value '" + e_.tokens[n].text + "'");
        if (e_.tokens.size() < n) fail(end_column(), "expected " + std::to_string(n) + " value(s)");
    }

    Rational rational(std::size_t i) const {
        const Token& t = token(i);
        try {
            return parse_rational(t.text);
        } catch (const std::invalid_argument&) {
            fail(t.column, "not a number '" + t.text + "'");
        }
    }

    std::vector<Rational> rationals(std::size_t from) const {
        std::vector<Rational> out;
        for (std::size_t i = from; i < size(); ++i) out.push_back(rational(i));
        return out;
    }

    std::size_t count(std::size_t i) const {
        const Token& t = token(i);
        std::size_t v = 0;
        const auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (ec != std::errc() || p != t.text.data() + t.text.size()) fail(t.column, "not a count '" + t.text + "'");
        return v;
    }

    double real(std::size_t i) const {
        const Token& t = token(i);
        double v = 0;
        const auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (ec != std::errc() || p != t.text.data() + t.text.size() || !(v >= 0))
            fail(t.column, "not a nonnegative number '" + t.text + "'");
        return v;
    }

    NodeAddress address(std::size_t i) const {
        const Token& t = token(i);
        const auto colon = t.text.find(':');
        if (colon == std::string::npos) fail(t.column, "expected level:index, got '" + t.text + "'");
        std::size_t l = 0;
        std::size_t k = 0;
        const char* s = t.text.data();
        const auto a = std::from_chars(s, s + colon, l);
        const auto b = std::from_chars(s + colon + 1, s + t.text.size(), k);
        if (a.ec != std::errc() || a.ptr != s + colon || b.ec != std::errc() || b.ptr != s + t.text.size())
            fail(t.column, "expected level:index, got '" + t.text + "'");
        return {l, k};
    }

  private:
    std::size_t end_column() const {
        if (e_.tokens.empty()) return e_.value_column;
        const Token& last = e_.tokens.back();
        return last.column + last.text.size();
    }

    const Entry& e_;
};

ModelKind parse_model_kind(const Reader& r) {
    r.expect_count(1);
    const std::string& s = r.token(0).text;
    if (s == "uniform-binary") return ModelKind::uniform_binary;
    if (s == "uniform") return ModelKind::uniform;
    if (s == "deterministic-chain") return ModelKind::deterministic_chain;
    if (s == "example33") return ModelKind::example33;
    if (s == "explicit") return ModelKind::explicit_tree;
    if (s == "lattice") return ModelKind::lattice;
    r.fail(r.token(0).column, "unknown model kind '" + s + "'");
}

ProcessSpec parse_process(const Reader& r, bool zero_is_none) {
    ProcessSpec p;
    const std::string& s = r.token(0).text;
    if (s == "none" || (zero_is_none && s == "zero")) {
        r.expect_count(1);
    } else if (s == "const") {
        r.expect_count(2);
        p.kind = ProcessSpec::Kind::constant;
        p.value = r.rational(1);
    } else if (s == "table") {
        if (r.size() < 2) r.rational(1);
        p.kind = ProcessSpec::Kind::table;
        p.table = r.rationals(1);
    } else {
        r.fail(r.token(0).column, "expected none, const or table, got '" + s + "'");
    }
    return p;
}

DriverSpec parse_driver(const Reader& r) {
    DriverSpec d;
    const std::string& s = r.token(0).text;
    if (s == "zero") {
        r.expect_count(1);
    } else if (s == "affine") {
        r.expect_count(3);
        d.kind = DriverSpec::Kind::affine;
        d.a = r.rational(1);
        d.b = r.rational(2);
    } else if (s == "monotone-cubic") {
        if (r.size() != 2) r.expect_count(4);
        d.kind = DriverSpec::Kind::monotone_cubic;
        d.c = r.rational(1);
        if (d.c < 0) r.fail(r.token(1).column, "cubic coefficient must be >= 0");
        if (r.size() == 4) {
            d.a = r.rational(2);
            d.b = r.rational(3);
        }
    } else if (s == "penalty-composite") {
        r.expect_count(5);
        d.kind = DriverSpec::Kind::penalty_composite;
        d.a = r.rational(1);
        d.b = r.rational(2);
        d.n = r.rational(3);
        d.m = r.rational(4);
        if (d.n < 0) r.fail(r.token(3).column, "penalty n must be >= 0");
        if (d.m < 0) r.fail(r.token(4).column, "penalty m must be >= 0");
    } else {
        r.fail(r.token(0).column, "unknown driver '" + s + "'");
    }
    return d;
}

/// Parses "row.<l>.<i>" style keys.
bool indexed_key(const std::string& key, std::string_view prefix, std::size_t& level, std::size_t& index) {
    if (key.rfind(prefix, 0) != 0) return false;
    const std::string_view rest(key.data() + prefix.size(), key.size() - prefix.size());
    const auto dot = rest.find('.');
    if (dot == std::string_view::npos) return false;
    const auto a = std::from_chars(rest.data(), rest.data() + dot, level);
    const auto b = std::from_chars(rest.data() + dot + 1, rest.data() + rest.size(), index);
    return a.ec == std::errc() && a.ptr == rest.data() + dot && b.ec == std::errc() &&
           b.ptr == rest.data() + rest.size();
}

void parse_model(const Section& entries, ModelSection& m) {
    std::map<std::pair<std::size_t, std::size_t>, const Entry*> rows;
    std::map<std::pair<std::size_t, std::size_t>, const Entry*> lattice;
    for (const Entry& e : entries) {
        const Reader r(e);
        std::size_t l = 0;
        std::size_t i = 0;
        if (e.key == "kind") {
            m.kind = parse_model_kind(r);
        } else if (e.key == "depth") {
            r.expect_count(1);
            m.depth = r.count(0);
        } else if (e.key == "factor") {
            r.expect_count(1);
            m.factor = r.count(0);
        } else if (e.key == "cells") {
            r.expect_count(1);
            m.cells = r.count(0);
        } else if (e.key == "times") {
            m.times = r.rationals(0);
        } else if (indexed_key(e.key, "row.", l, i)) {
            rows[{l, i}] = &e;
        } else if (indexed_key(e.key, "lattice.", l, i)) {
            lattice[{l, i}] = &e;
        } else {
            throw ParseError(e.line, e.key_column, "unknown key '" + e.key + "' in [model]");
        }
    }
    for (const auto& [at, e] : rows) {
        const Reader r(*e);
        if (r.size() == 0) r.token(0);
        if (m.rows.size() <= at.first) m.rows.resize(at.first + 1);
        if (m.rows[at.first].size() <= at.second) m.rows[at.first].resize(at.second + 1);
        m.rows[at.first][at.second] = r.rationals(0);
    }
    for (const auto& [at, e] : lattice) {
        const Reader r(*e);
        if (r.size() == 0) r.token(0);
        std::vector<std::pair<std::size_t, Rational>> row;
        for (std::size_t k = 0; k < r.size(); ++k) {
            const Token& t = r.token(k);
            const auto colon = t.text.find(':');
            if (colon == std::string::npos) r.fail(t.column, "expected target:probability, got '" + t.text + "'");
            std::size_t target = 0;
            const auto res = std::from_chars(t.text.data(), t.text.data() + colon, target);
            if (res.ec != std::errc() || res.ptr != t.text.data() + colon)
                r.fail(t.column, "bad lattice target in '" + t.text + "'");
            try {
                row.emplace_back(target, parse_rational(std::string_view(t.text).substr(colon + 1)));
            } catch (const std::invalid_argument&) {
                r.fail(t.column + colon + 1, "not a number in '" + t.text + "'");
            }
        }
        if (m.lattice.size() <= at.first) m.lattice.resize(at.first + 1);
        if (m.lattice[at.first].size() <= at.second) m.lattice[at.first].resize(at.second + 1);
        m.lattice[at.first][at.second] = std::move(row);
    }
}

void parse_barriers(const Section& entries, BarrierSection& b) {
    for (const Entry& e : entries) {
        const Reader r(e);
        if (e.key == "family") {
            r.expect_count(1);
            if (r.token(0).text != "example33")
                r.fail(r.token(0).column, "unknown barrier family '" + r.token(0).text + "'");
            b.example33_family = true;
        } else if (e.key == "lower") {
            b.lower = parse_process(r, false);
        } else if (e.key == "upper") {
            b.upper = parse_process(r, false);
        } else {
            throw ParseError(e.line, e.key_column, "unknown key '" + e.key + "' in [barriers]");
        }
    }
}

void parse_generator(const Section& entries, GeneratorSection& g) {
    for (const Entry& e : entries) {
        const Reader r(e);
        if (e.key == "xi") {
            const std::string& s = r.token(0).text;
            if (s == "const") {
                r.expect_count(2);
                g.xi_kind = GeneratorSection::XiKind::constant;
                g.xi_value = r.rational(1);
            } else if (s == "table") {
                if (r.size() < 2) r.rational(1);
                g.xi_kind = GeneratorSection::XiKind::table;
                g.xi_table = r.rationals(1);
            } else if (s == "midpoint") {
                r.expect_count(1);
                g.xi_kind = GeneratorSection::XiKind::midpoint;
            } else {
                r.fail(r.token(0).column, "expected const, table or midpoint, got '" + s + "'");
            }
        } else if (e.key == "f") {
            g.f = parse_driver(r);
        } else if (e.key == "mu") {
            r.expect_count(1);
            g.mu = r.rational(0);
        } else if (e.key == "v") {
            g.v = parse_process(r, true);
        } else {
            throw ParseError(e.line, e.key_column, "unknown key '" + e.key + "' in [generator]");
        }
    }
}

void parse_run(const Section& entries, RunSection& run) {
    for (const Entry& e : entries) {
        const Reader r(e);
        if (e.key == "mode") {
            r.expect_count(1);
            try {
                run.mode = parse_run_mode(r.token(0).text);
            } catch (const std::invalid_argument& ex) {
                r.fail(r.token(0).column, ex.what());
            }
        } else if (e.key == "numeric") {
            r.expect_count(1);
            const std::string& s = r.token(0).text;
            if (s != "rational" && s != "float") r.fail(r.token(0).column, "expected rational or float");
            run.exact = s == "rational";
        } else if (e.key == "tol") {
            r.expect_count(1);
            run.tol = r.real(0);
        } else if (e.key == "ns" || e.key == "ms") {
            if (r.size() == 0) r.token(0);
            std::vector<long> values;
            for (std::size_t i = 0; i < r.size(); ++i) values.push_back(static_cast<long>(r.count(i)));
            (e.key == "ns" ? run.ns : run.ms) = std::move(values);
        } else if (e.key == "eps") {
            if (r.size() == 0) r.token(0);
            run.eps = r.rationals(0);
            for (std::size_t i = 0; i < run.eps.size(); ++i)
                if (!(run.eps[i] > 0)) r.fail(r.token(i).column, "values must be positive");
        } else if (e.key == "seed") {
            r.expect_count(1);
            run.seed = r.count(0);
        } else if (e.key == "budget") {
            r.expect_count(1);
            run.budget = r.count(0);
        } else if (e.key == "batch") {
            r.expect_count(1);
            run.batch = r.count(0);
        } else if (e.key == "depth") {
            r.expect_count(1);
            run.depth = r.count(0);
        } else if (e.key == "node") {
            r.expect_count(1);
            run.node = r.address(0);
        } else {
            throw ParseError(e.line, e.key_column, "unknown key '" + e.key + "' in [run]");
        }
    }
}

std::string join(const std::vector<Rational>& values) {
    std::string out;
    for (const Rational& v : values) {
        if (!out.empty()) out += ' ';
        out += to_string(v);
    }
    return out;
}

std::string join(const std::vector<long>& values) {
    std::string out;
    for (long v : values) {
        if (!out.empty()) out += ' ';
        out += std::to_string(v);
    }
    return out;
}

std::string process_text(const ProcessSpec& p, const char* none_word) {
    switch (p.kind) {
        case ProcessSpec::Kind::none:
            return none_word;
        case ProcessSpec::Kind::constant:
            return "const " + to_string(p.value);
        case ProcessSpec::Kind::table:
            return "table " + join(p.table);
    }
    return none_word;
}

std::vector<Rational> unit_times(std::size_t depth) {
    std::vector<Rational> t;
    for (std::size_t i = 0; i <= depth; ++i) t.emplace_back(static_cast<long>(i));
    return t;
}

template <class Num>
AdaptedProcess<Num> resolve(const TreeModel& model, const ProcessSpec& p, const char* what) {
    if (p.kind == ProcessSpec::Kind::constant)
        return AdaptedProcess<Num>(model.node_count(), from_rational<Num>(p.value));
    if (p.table.size() != model.node_count())
        throw ModelError(std::string(what) + " table has " + std::to_string(p.table.size()) + " values, model has " +
                         std::to_string(model.node_count()) + " nodes");
    std::vector<Num> v;
    for (const Rational& q : p.table) v.push_back(from_rational<Num>(q));
    return AdaptedProcess<Num>(std::move(v));
}

}  // namespace

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::uniform_binary:
            return "uniform-binary";
        case ModelKind::uniform:
            return "uniform";
        case ModelKind::deterministic_chain:
            return "deterministic-chain";
        case ModelKind::example33:
            return "example33";
        case ModelKind::explicit_tree:
            return "explicit";
        case ModelKind::lattice:
            return "lattice";
    }
    return "?";
}

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::solve:
            return "solve";
        case RunMode::penalize:
            return "penalize";
        case RunMode::separation:
            return "separation";
        case RunMode::game:
            return "game";
        case RunMode::batch:
            return "batch";
    }
    return "?";
}

RunMode parse_run_mode(std::string_view text) {
    for (RunMode m : {RunMode::solve, RunMode::penalize, RunMode::separation, RunMode::game, RunMode::batch})
        if (text == to_string(m)) return m;
    throw std::invalid_argument("unknown mode '" + std::string(text) + "'");
}

Scenario parse_scenario(std::string_view text) {
    std::map<std::string, Section> sections;
    std::map<std::string, std::size_t> seen_keys;
    std::string current;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        std::size_t first = 0;
        while (first < line.size() && is_space(line[first])) ++first;
        std::size_t last = line.size();
        while (last > first && is_space(line[last - 1])) --last;
        if (first == last) continue;
        const std::string_view body = line.substr(first, last - first);
        if (body.front() == '[') {
            if (body.back() != ']') throw ParseError(line_no, first + 1, "unterminated section header");
            current = std::string(body.substr(1, body.size() - 2));
            if (current != "model" && current != "barriers" && current != "generator" && current != "run")
                throw ParseError(line_no, first + 2, "unknown section [" + current + "]");
            if (sections.count(current)) throw ParseError(line_no, first + 1, "duplicate section [" + current + "]");
            sections[current];
            continue;
        }
        if (current.empty()) throw ParseError(line_no, first + 1, "key outside of a section");
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, first + 1, "expected key = value");
        std::size_t key_end = eq;
        while (key_end > first && is_space(line[key_end - 1])) --key_end;
        if (key_end == first) throw ParseError(line_no, first + 1, "missing key before '='");
        Entry e;
        e.key = std::string(line.substr(first, key_end - first));
        e.line = line_no;
        e.key_column = first + 1;
        e.value_column = eq + 2;
        e.tokens = split_tokens(line.substr(eq + 1), eq + 2);
        if (e.tokens.empty()) throw ParseError(line_no, eq + 2, e.key + ": missing value");
        const std::string qualified = current + "." + e.key;
        if (seen_keys.count(qualified))
            throw ParseError(line_no, first + 1,
                             "duplicate key '" + e.key + "' (first on line " + std::to_string(seen_keys[qualified]) + ")");
        seen_keys[qualified] = line_no;
        sections[current].push_back(std::move(e));
    }

    Scenario s;
    if (sections.count("model")) parse_model(sections["model"], s.model);
    if (s.model.kind == ModelKind::example33) s.barriers.example33_family = true;
    if (sections.count("barriers")) parse_barriers(sections["barriers"], s.barriers);
    if (sections.count("generator")) parse_generator(sections["generator"], s.generator);
    if (sections.count("run")) parse_run(sections["run"], s.run);
    return s;
}

std::string serialize_scenario(const Scenario& s) {
    std::ostringstream out;
    const ModelSection& m = s.model;
    out << "[model]\n";
    out << "kind = " << to_string(m.kind) << '\n';
    switch (m.kind) {
        case ModelKind::uniform_binary:
        case ModelKind::deterministic_chain:
            out << "depth = " << m.depth << '\n';
            break;
        case ModelKind::uniform:
            out << "depth = " << m.depth << '\n';
            out << "factor = " << m.factor << '\n';
            break;
        case ModelKind::example33:
            out << "cells = " << m.cells << '\n';
            break;
        case ModelKind::explicit_tree:
        case ModelKind::lattice:
            break;
    }
    const bool generated = m.kind == ModelKind::uniform_binary || m.kind == ModelKind::uniform ||
                           m.kind == ModelKind::deterministic_chain;
    if (m.kind != ModelKind::example33 && !m.times.empty() && !(generated && m.times == unit_times(m.depth)))
        out << "times = " << join(m.times) << '\n';
    if (m.kind == ModelKind::explicit_tree) {
        for (std::size_t l = 0; l < m.rows.size(); ++l)
            for (std::size_t i = 0; i < m.rows[l].size(); ++i)
                out << "row." << l << '.' << i << " = " << join(m.rows[l][i]) << '\n';
    }
    if (m.kind == ModelKind::lattice) {
        for (std::size_t l = 0; l < m.lattice.size(); ++l)
            for (std::size_t i = 0; i < m.lattice[l].size(); ++i) {
                out << "lattice." << l << '.' << i << " =";
                for (const auto& [target, p] : m.lattice[l][i]) out << ' ' << target << ':' << to_string(p);
                out << '\n';
            }
    }

    out << "\n[barriers]\n";
    if (s.barriers.example33_family) {
        out << "family = example33\n";
    } else {
        out << "lower = " << process_text(s.barriers.lower, "none") << '\n';
        out << "upper = " << process_text(s.barriers.upper, "none") << '\n';
    }

    const GeneratorSection& g = s.generator;
    out << "\n[generator]\n";
    switch (g.xi_kind) {
        case GeneratorSection::XiKind::constant:
            out << "xi = const " << to_string(g.xi_value) << '\n';
            break;
        case GeneratorSection::XiKind::table:
            out << "xi = table " << join(g.xi_table) << '\n';
            break;
        case GeneratorSection::XiKind::midpoint:
            out << "xi = midpoint\n";
            break;
    }
    out << "f = ";
    switch (g.f.kind) {
        case DriverSpec::Kind::zero:
            out << "zero";
            break;
        case DriverSpec::Kind::affine:
            out << "affine " << to_string(g.f.a) << ' ' << to_string(g.f.b);
            break;
        case DriverSpec::Kind::monotone_cubic:
            out << "monotone-cubic " << to_string(g.f.c) << ' ' << to_string(g.f.a) << ' ' << to_string(g.f.b);
            break;
        case DriverSpec::Kind::penalty_composite:
            out << "penalty-composite " << to_string(g.f.a) << ' ' << to_string(g.f.b) << ' ' << to_string(g.f.n)
                << ' ' << to_string(g.f.m);
            break;
    }
    out << '\n';
    out << "mu = " << to_string(g.mu) << '\n';
    out << "v = " << process_text(g.v, "zero") << '\n';

    const RunSection& r = s.run;
    out << "\n[run]\n";
    out << "mode = " << to_string(r.mode) << '\n';
    out << "numeric = " << (r.exact ? "rational" : "float") << '\n';
    out << "tol = " << to_string(r.tol) << '\n';
    if (!r.ns.empty()) out << "ns = " << join(r.ns) << '\n';
    if (!r.ms.empty()) out << "ms = " << join(r.ms) << '\n';
    if (!r.eps.empty()) out << "eps = " << join(r.eps) << '\n';
    out << "seed = " << r.seed << '\n';
    out << "budget = " << r.budget << '\n';
    out << "batch = " << r.batch << '\n';
    out << "depth = " << r.depth << '\n';
    out << "node = " << r.node.level << ':' << r.node.index << '\n';
    return out.str();
}

TreeModel build_model(const ModelSection& m) {
    switch (m.kind) {
        case ModelKind::uniform_binary:
        case ModelKind::uniform:
        case ModelKind::deterministic_chain: {
            const std::size_t factor =
                m.kind == ModelKind::uniform_binary ? 2 : (m.kind == ModelKind::deterministic_chain ? 1 : m.factor);
            TreeModel base = TreeModel::uniform(m.depth, factor);
            if (m.times.empty() || m.times == base.times()) return base;
            if (m.times.size() != m.depth + 1)
                throw ModelError("times has " + std::to_string(m.times.size()) + " entries, expected " +
                                 std::to_string(m.depth + 1));
            std::vector<std::vector<std::vector<Rational>>> branching;
            for (std::size_t l = 0; l < m.depth; ++l) {
                std::vector<std::vector<Rational>> level;
                for (NodeId v = base.level_begin(l); v < base.level_end(l); ++v) {
                    std::vector<Rational> row;
                    for (NodeId c : base.children(v)) row.push_back(base.edge_probability(c));
                    level.push_back(std::move(row));
                }
                branching.push_back(std::move(level));
            }
            return TreeModel(m.times, std::move(branching));
        }
        case ModelKind::example33:
            if (m.cells == 0) throw ModelError("example33 needs at least one cell");
            return example33_barriers<Rational>(m.cells).model;
        case ModelKind::explicit_tree: {
            auto times = m.times.empty() ? unit_times(m.rows.size()) : m.times;
            return TreeModel(std::move(times), m.rows);
        }
        case ModelKind::lattice: {
            LatticeSpec spec{m.times.empty() ? unit_times(m.lattice.size()) : m.times, m.lattice};
            return expand_lattice(spec).model;
        }
    }
    throw ModelError("unknown model kind");
}

template <class Num>
Problem<Num> build_problem(const Scenario& s) {
    TreeModel model = build_model(s.model);
    const std::size_t nodes = model.node_count();

    Barriers<Num> barriers;
    if (s.barriers.example33_family) {
        if (s.model.kind != ModelKind::example33) throw ModelError("barrier family example33 needs model kind example33");
        auto family = example33_barriers<Num>(s.model.cells);
        barriers = Barriers<Num>::both(std::move(family.lower), std::move(family.upper));
    } else {
        if (s.barriers.lower.kind != ProcessSpec::Kind::none)
            barriers.lower = resolve<Num>(model, s.barriers.lower, "lower barrier");
        if (s.barriers.upper.kind != ProcessSpec::Kind::none)
            barriers.upper = resolve<Num>(model, s.barriers.upper, "upper barrier");
    }

    const GeneratorSection& g = s.generator;
    std::vector<Num> xi;
    switch (g.xi_kind) {
        case GeneratorSection::XiKind::constant:
            xi.assign(model.leaf_count(), from_rational<Num>(g.xi_value));
            break;
        case GeneratorSection::XiKind::table:
            if (g.xi_table.size() != model.leaf_count())
                throw ModelError("xi table has " + std::to_string(g.xi_table.size()) + " values, model has " +
                                 std::to_string(model.leaf_count()) + " leaves");
            for (const Rational& q : g.xi_table) xi.push_back(from_rational<Num>(q));
            break;
        case GeneratorSection::XiKind::midpoint:
            if (!barriers.lower || !barriers.upper) throw ModelError("xi = midpoint needs both barriers");
            for (std::size_t k = 0; k < model.leaf_count(); ++k) {
                const NodeId leaf = model.leaf(k);
                xi.push_back(((*barriers.lower)[leaf] + (*barriers.upper)[leaf]) / Num(2));
            }
            break;
    }

    Driver<Num> f = Driver<Num>::zero();
    const Num a = from_rational<Num>(g.f.a);
    const Num b = from_rational<Num>(g.f.b);
    switch (g.f.kind) {
        case DriverSpec::Kind::zero:
            break;
        case DriverSpec::Kind::affine:
            f = Driver<Num>::affine(a, b);
            break;
        case DriverSpec::Kind::monotone_cubic:
            f = Driver<Num>::monotone_cubic(from_rational<Num>(g.f.c), a, b);
            break;
        case DriverSpec::Kind::penalty_composite:
            if (!barriers.lower || !barriers.upper) throw ModelError("penalty-composite driver needs both barriers");
            f = Driver<Num>::affine(a, b)
                    .with_lower_penalty(*barriers.lower, from_rational<Num>(g.f.n))
                    .with_upper_penalty(*barriers.upper, from_rational<Num>(g.f.m));
            break;
    }

    GeneratorSpec<Num> gen = GeneratorSpec<Num>::make(model, std::move(xi), std::move(f), from_rational<Num>(g.mu));
    if (g.v.kind == ProcessSpec::Kind::constant) {
        gen.v = PredictableIncrements<Num>(nodes, Num(0));
        for (NodeId v = 0; v < nodes; ++v)
            if (!model.is_leaf(v)) gen.v.at(v) = from_rational<Num>(g.v.value);
    } else if (g.v.kind == ProcessSpec::Kind::table) {
        const auto values = resolve<Num>(model, g.v, "v increments");
        gen.v = PredictableIncrements<Num>(std::vector<Num>(values.values().begin(), values.values().end()));
    }
    return {std::move(model), std::move(gen), std::move(barriers)};
}

Scenario generate_random_scenario(std::uint64_t seed, std::size_t depth) {
    if (depth == 0 || depth > max_random_depth)
        throw DomainError("random scenario depth must be in 1.." + std::to_string(max_random_depth));
    std::mt19937_64 rng(seed);
    auto integer = [&rng](long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(rng); };
    static const Rational probabilities[] = {Rational(1, 4), Rational(1, 3), Rational(1, 2), Rational(2, 3),
                                             Rational(3, 4)};

    Scenario s;
    s.model.kind = ModelKind::explicit_tree;
    s.model.times = unit_times(depth);
    std::size_t width = 1;
    for (std::size_t l = 0; l < depth; ++l) {
        std::vector<std::vector<Rational>> level;
        for (std::size_t i = 0; i < width; ++i) {
            const Rational p = probabilities[integer(0, 4)];
            level.push_back({p, Rational(1) - p});
        }
        s.model.rows.push_back(std::move(level));
        width *= 2;
    }
    const TreeModel model = build_model(s.model);

    std::vector<Rational> lower;
    std::vector<Rational> upper;
    for (NodeId v = 0; v < model.node_count(); ++v) {
        lower.emplace_back(integer(-8, 8), 32);
        upper.push_back(lower.back() + Rational(integer(2, 8), 32));
    }
    std::vector<Rational> xi;
    for (std::size_t k = 0; k < model.leaf_count(); ++k) {
        const NodeId leaf = model.leaf(k);
        xi.push_back(lower[leaf] + (upper[leaf] - lower[leaf]) * Rational(integer(0, 4), 4));
    }
    s.barriers.lower = {ProcessSpec::Kind::table, 0, std::move(lower)};
    s.barriers.upper = {ProcessSpec::Kind::table, 0, std::move(upper)};
    s.generator.xi_kind = GeneratorSection::XiKind::table;
    s.generator.xi_table = std::move(xi);

    if (integer(0, 3) != 0) {
        s.generator.f.kind = DriverSpec::Kind::affine;
        s.generator.f.a = Rational(integer(-4, 4), 32);
        s.generator.f.b = Rational(-integer(0, 2), 4);
        s.generator.mu = s.generator.f.b;
    }
    if (integer(0, 1) == 1) {
        std::vector<Rational> v(model.node_count(), Rational(0));
        for (NodeId n = 0; n < model.node_count(); ++n)
            if (!model.is_leaf(n)) v[n] = Rational(integer(-4, 4), 64);
        s.generator.v = {ProcessSpec::Kind::table, 0, std::move(v)};
    }
    s.run.seed = seed;
    s.run.depth = depth;
    return s;
}

template Problem<Rational> build_problem<Rational>(const Scenario&);
template Problem<double> build_problem<double>(const Scenario&);

}  // namespace reflectlab
