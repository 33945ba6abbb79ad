#include "eventstate/scenario_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace eventstate {

namespace {

std::size_t line_of(std::string_view text, std::size_t pos) {
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(std::min(pos, text.size())), '\n'));
}

/// Best-effort source line for a JSON pointer: follows the object keys of the
/// path through the raw text in order.
std::size_t locate(std::string_view text, const std::string& pointer) {
    std::size_t pos = 0;
    bool found = false;
    std::size_t start = 1;
    while (start <= pointer.size()) {
        std::size_t end = pointer.find('/', start);
        if (end == std::string::npos) end = pointer.size();
        const std::string token = pointer.substr(start, end - start);
        start = end + 1;
        if (token.empty() || std::all_of(token.begin(), token.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
        const std::size_t hit = text.find("\"" + token + "\"", pos);
        if (hit == std::string_view::npos) break;
        pos = hit;
        found = true;
    }
    return found ? line_of(text, pos) : 0;
}

struct Doc {
    std::string_view text;
    std::string source;
};

class Node {
public:
    Node(const Json& j, std::string path, const Doc& doc) : j_(j), path_(std::move(path)), doc_(doc) {}

    [[noreturn]] void fail(const std::string& message) const {
        throw SchemaError(doc_.source, path_.empty() ? "/" : path_, locate(doc_.text, path_), message);
    }

    const Json& json() const { return j_; }
    const std::string& path() const { return path_; }
    bool is_string() const { return j_.is_string(); }
    bool is_number() const { return j_.is_number(); }
    bool is_array() const { return j_.is_array(); }
    bool is_object() const { return j_.is_object(); }
    bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

    Node at(const char* key) const {
        if (!j_.is_object()) fail("expected an object");
        if (!j_.contains(key)) fail(std::string("missing required field \"") + key + "\"");
        return Node(j_.at(key), path_ + "/" + key, doc_);
    }
    std::optional<Node> opt(const char* key) const {
        if (!has(key)) return std::nullopt;
        return Node(j_.at(key), path_ + "/" + key, doc_);
    }
    Node at(std::size_t i) const { return Node(j_.at(i), path_ + "/" + std::to_string(i), doc_); }
    std::size_t size() const {
        if (!j_.is_array()) fail("expected an array");
        return j_.size();
    }

    double num() const {
        if (!j_.is_number()) fail("expected a number");
        const double v = j_.get<double>();
        if (!std::isfinite(v)) fail("expected a finite number");
        return v;
    }
    std::size_t count() const {
        if (!j_.is_number_unsigned()) fail("expected a non-negative integer");
        return j_.get<std::size_t>();
    }
    std::string str() const {
        if (!j_.is_string()) fail("expected a string");
        return j_.get<std::string>();
    }
    void only(std::initializer_list<const char*> keys) const {
        if (!j_.is_object()) fail("expected an object");
        for (const auto& [k, v] : j_.items()) {
            if (std::none_of(keys.begin(), keys.end(), [&](const char* x) { return k == x; })) {
                Node(v, path_ + "/" + k, doc_).fail("unknown field \"" + k + "\"");
            }
        }
    }

private:
    const Json& j_;
    std::string path_;
    const Doc& doc_;
};

/// Runs f, turning library validation errors into diagnostics at `node`.
template <class F>
auto at_node(const Node& node, F&& f) {
    try {
        return f();
    } catch (const SchemaError&) {
        throw;
    } catch (const InvalidInput& e) {
        node.fail(e.what());
    }
}

Complex parse_complex(const Node& n) {
    if (n.is_number()) return {n.num(), 0.0};
    if (!n.is_array() || n.size() != 2) n.fail("expected a complex number [re, im] or a real number");
    return {n.at(std::size_t{0}).num(), n.at(std::size_t{1}).num()};
}

Ket parse_vector(const Node& n) {
    const std::size_t d = n.size();
    if (d == 0) n.fail("empty vector");
    Ket v(static_cast<Index>(d));
    for (std::size_t i = 0; i < d; ++i) v(static_cast<Index>(i)) = parse_complex(n.at(i));
    return v;
}

Operator parse_matrix(const Node& n) {
    if (n.is_object() && n.has("re")) return at_node(n, [&] { return operator_from_json(n.json()); });
    if (n.is_object() && n.has("matrix")) return parse_matrix(n.at("matrix"));
    const std::size_t rows = n.size();
    if (rows == 0) n.fail("empty matrix");
    const std::size_t cols = n.at(std::size_t{0}).size();
    Operator m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        const Node row = n.at(r);
        if (row.size() != cols) row.fail("ragged matrix: expected " + std::to_string(cols) + " entries");
        for (std::size_t c = 0; c < cols; ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = parse_complex(row.at(c));
    }
    return m;
}

Ket named_state(const Node& n) {
    const std::string name = n.str();
    const double s = 1.0 / std::sqrt(2.0);
    const Complex i(0.0, 1.0);
    Ket k;
    if (name == "+z") k = (Ket(2) << 1, 0).finished();
    else if (name == "-z") k = (Ket(2) << 0, 1).finished();
    else if (name == "+x") k = (Ket(2) << s, s).finished();
    else if (name == "-x") k = (Ket(2) << s, -s).finished();
    else if (name == "+y") k = (Ket(2) << s, s * i).finished();
    else if (name == "-y") k = (Ket(2) << s, -s * i).finished();
    else if (name == "phi+") k = (Ket(4) << s, 0, 0, s).finished();
    else if (name == "phi-") k = (Ket(4) << s, 0, 0, -s).finished();
    else if (name == "psi+") k = (Ket(4) << 0, s, s, 0).finished();
    else if (name == "singlet") k = (Ket(4) << 0, s, -s, 0).finished();
    else n.fail("unknown named state \"" + name + "\" (use +z, -z, +x, -x, +y, -y, phi+, phi-, psi+, singlet, mixed)");
    return k;
}

DensityMatrix parse_initial(const Node& n, Index dim) {
    if (n.is_string() && n.str() == "mixed") return DensityMatrix::maximally_mixed(dim);
    if (n.is_string()) return DensityMatrix::pure(named_state(n));
    if (n.is_array()) {
        const Ket k = parse_vector(n);
        at_node(n, [&] { require_unit_ket(k, "initial ket"); return 0; });
        return DensityMatrix::pure(k);
    }
    if (n.has("ket")) {
        n.only({"ket"});
        return parse_initial(n.at("ket"), dim);
    }
    if (n.has("density")) {
        n.only({"density"});
        const Operator m = parse_matrix(n.at("density"));
        return at_node(n.at("density"), [&] { return DensityMatrix(m); });
    }
    n.fail("initial must be a named state, a ket, {\"ket\": ...} or {\"density\": ...}");
}

std::vector<double> parse_labels(const Node& n) {
    std::vector<double> out;
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(n.at(i).num());
    return out;
}

MeasurementModel parse_basis(const Node& n) {
    if (n.is_string()) {
        const std::string name = n.str();
        return at_node(n, [&] { return MeasurementModel::named(name); });
    }
    if (n.is_number()) return plane_setting(n.num() * std::numbers::pi / 180.0);
    if (n.has("theta")) {
        n.only({"theta", "phi"});
        const double theta = n.at("theta").num();
        const double phi = n.has("phi") ? n.at("phi").num() : 0.0;
        return MeasurementModel::bloch(theta, phi);
    }
    if (n.has("vectors")) {
        n.only({"vectors", "labels"});
        const Node vs = n.at("vectors");
        const std::size_t d = vs.size();
        Operator b(static_cast<Index>(d), static_cast<Index>(d));
        for (std::size_t i = 0; i < d; ++i) {
            const Ket v = parse_vector(vs.at(i));
            if (static_cast<std::size_t>(v.size()) != d) vs.at(i).fail("basis vector has the wrong length");
            b.col(static_cast<Index>(i)) = v;
        }
        std::vector<double> labels;
        if (n.has("labels")) {
            labels = parse_labels(n.at("labels"));
        } else if (d == 2) {
            labels = {1.0, -1.0};
        } else {
            for (std::size_t i = 0; i < d; ++i) labels.push_back(static_cast<double>(i));
        }
        return at_node(n, [&] { return MeasurementModel(b, labels); });
    }
    n.fail("basis must be \"Sz\"/\"Sx\"/\"Sy\", an x-z plane angle in degrees, {\"theta\",\"phi\"} or {\"vectors\",\"labels\"}");
}

MeasurementModel with_labels(const MeasurementModel& basis, const Node& n) {
    const std::vector<double> labels = parse_labels(n);
    return at_node(n, [&] { return MeasurementModel(basis.basis(), labels); });
}

Operator parse_unitary(const Node& n, Index dim) {
    Operator u;
    if (n.is_string()) {
        const std::string name = n.str();
        if (name == "identity") return Operator::Identity(dim, dim);
        if (name == "hadamard") u = hadamard();
        else n.fail("unknown named evolution \"" + name + "\" (use identity, hadamard)");
    } else if (n.has("axis")) {
        n.only({"axis", "angle"});
        const std::string axis = n.at("axis").str();
        if (axis.size() != 1 || std::string("xyz").find(axis[0]) == std::string::npos) n.at("axis").fail("axis must be x, y or z");
        u = rotation(axis[0], n.at("angle").num());
    } else {
        u = parse_matrix(n);
    }
    at_node(n, [&] { require_unitary(u, "evolution"); return 0; });
    return u;
}

Operator parse_hamiltonian(const Node& n, Index dim) {
    Operator h;
    if (n.is_string()) {
        if (n.str() != "zero") n.fail("unknown named Hamiltonian \"" + n.str() + "\" (use zero)");
        return Operator::Zero(dim, dim);
    }
    if (n.has("axis")) {
        n.only({"axis", "omega"});
        const std::string axis = n.at("axis").str();
        if (axis.size() != 1 || std::string("xyz").find(axis[0]) == std::string::npos) n.at("axis").fail("axis must be x, y or z");
        h = 0.5 * n.at("omega").num() * pauli::by_axis(axis[0]);
    } else {
        h = parse_matrix(n);
    }
    if (h.rows() != h.cols() || hermiticity_defect(h) > default_policy().hermiticity) n.fail("Hamiltonian must be Hermitian");
    return h;
}

void collect_gamma(const std::optional<Node>& n, std::vector<double>& gammas) {
    if (n && n->has("exponential")) gammas.push_back(n->at("exponential").at("gamma").num());
}

TimeGrid parse_grid(const Node& timing) {
    const Node g = timing.at("grid");
    g.only({"t0", "dt", "n_bins"});
    const double t0 = g.has("t0") ? g.at("t0").num() : 0.0;
    const double dt = g.at("dt").num();
    if (g.has("n_bins")) {
        TimeGrid grid{t0, dt, g.at("n_bins").count()};
        at_node(g, [&] { grid.validate(); return 0; });
        return grid;
    }
    std::vector<double> gammas;
    collect_gamma(timing.opt("profileA"), gammas);
    if (const auto b = timing.opt("profileB")) {
        collect_gamma(b, gammas);
        collect_gamma(b->opt("conditional"), gammas);
    }
    if (gammas.empty()) g.fail("n_bins may only be omitted with an exponential profile");
    return at_node(g, [&] { return grid_for_exponential(*std::min_element(gammas.begin(), gammas.end()), dt, 1e-6, t0); });
}

TimingProfile parse_marginal(const Node& n, const TimeGrid& grid, std::vector<std::string>& warnings) {
    if (n.has("exponential")) {
        n.only({"exponential"});
        const Node e = n.at("exponential");
        e.only({"gamma"});
        const double gamma = e.at("gamma").num();
        ExponentialProfile p = at_node(e, [&] { return exponential_profile(gamma, grid); });
        for (auto& w : p.warnings) warnings.push_back(n.path() + ": " + w);
        return p.profile;
    }
    if (n.has("delta")) {
        n.only({"delta"});
        const Node d = n.at("delta");
        d.only({"bin"});
        const std::size_t bin = d.at("bin").count();
        return at_node(d, [&] { return delta_profile(grid, bin); });
    }
    if (n.has("amplitudes")) {
        n.only({"amplitudes"});
        const Ket a = parse_vector(n.at("amplitudes"));
        return at_node(n.at("amplitudes"), [&] { return TimingProfile::marginal(grid, a); });
    }
    n.fail("profile must be {\"exponential\"}, {\"delta\"} or {\"amplitudes\"}");
}

TimingProfile parse_conditional(const Node& n, const TimeGrid& grid) {
    if (n.has("exponential")) {
        n.only({"exponential"});
        const Node e = n.at("exponential");
        e.only({"gamma"});
        const double gamma = e.at("gamma").num();
        return at_node(e, [&] { return conditional_exponential_profile(gamma, grid); });
    }
    if (n.has("delta")) {
        n.only({"delta"});
        const Node d = n.at("delta");
        d.only({"lag"});
        const std::size_t lag = d.at("lag").count();
        return at_node(d, [&] { return conditional_delta_profile(grid, lag); });
    }
    if (n.has("kernel")) {
        n.only({"kernel"});
        const Ket k = parse_vector(n.at("kernel"));
        return at_node(n.at("kernel"), [&] { return conditional_from_kernel(grid, k); });
    }
    if (n.has("amplitudes")) {
        n.only({"amplitudes"});
        const Operator a = parse_matrix(n.at("amplitudes"));
        return at_node(n.at("amplitudes"), [&] { return TimingProfile::conditional(grid, a); });
    }
    n.fail("conditional profile must be {\"exponential\"}, {\"delta\"}, {\"kernel\"} or {\"amplitudes\"}");
}

TimingSpec parse_timing(const Node& n, EventKind kind, std::vector<std::string>& warnings) {
    n.only({"grid", "profileA", "profileB", "joint"});
    const TimeGrid grid = parse_grid(n);
    TimingProfile a = parse_marginal(n.at("profileA"), grid, warnings);
    const Node b = n.at("profileB");
    std::optional<TimingProfile> pb;
    if (kind == EventKind::Timelike) {
        if (!b.has("conditional")) b.fail("TL scenarios need a conditional profileB: {\"conditional\": {...}}");
        b.only({"conditional"});
        pb = parse_conditional(b.at("conditional"), grid);
    } else {
        if (b.has("conditional")) b.fail("SL scenarios take a marginal profileB");
        pb = parse_marginal(b, grid, warnings);
    }
    TimingSpec spec{std::move(a), std::move(*pb), std::nullopt};
    if (const auto j = n.opt("joint")) {
        if (kind != EventKind::Spacelike) j->fail("a joint amplitude table is only meaningful for SL scenarios");
        const Operator table = parse_matrix(*j);
        if (table.rows() != static_cast<Index>(grid.n_bins) || table.cols() != table.rows()) {
            j->fail("joint table must be n_bins x n_bins");
        }
        spec.joint_amplitude = table;
    }
    return spec;
}

} // namespace

SchemaError::SchemaError(std::string source, std::string field, std::size_t line, const std::string& message)
    : InvalidInput(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + field + ": " + message),
      field_(std::move(field)),
      line_(line) {}

std::string to_string(BuildMode mode) {
    switch (mode) {
    case BuildMode::Auto: return "auto";
    case BuildMode::Instant: return "instant";
    case BuildMode::Fuzzy: return "fuzzy";
    case BuildMode::Timed: return "timed";
    }
    return "auto";
}

BuildMode ScenarioFile::resolved_build() const {
    if (build != BuildMode::Auto) return build;
    return scenario.timing ? BuildMode::Fuzzy : BuildMode::Instant;
}

ScenarioFile parse_scenario(std::string_view text, const std::string& source) {
    Json root;
    try {
        root = Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        throw SchemaError(source, "/", line_of(text, e.byte == 0 ? 0 : e.byte - 1), std::string("invalid JSON: ") + e.what());
    }
    const Doc doc{text, source};
    const Node n(root, "", doc);
    n.only({"name", "description", "kind", "initial", "basisA", "basisB", "labelsA", "labelsB", "evolution",
            "hamiltonian", "timing", "build", "chsh"});

    ScenarioFile file;
    file.source = source;
    EventScenario& s = file.scenario;
    const Node kind = n.at("kind");
    s.kind = at_node(kind, [&] { return event_kind_from_string(kind.str()); });
    const bool tl = s.kind == EventKind::Timelike;

    s.basis_a = parse_basis(n.at("basisA"));
    s.basis_b = parse_basis(n.at("basisB"));
    if (const auto l = n.opt("labelsA")) s.basis_a = with_labels(s.basis_a, *l);
    if (const auto l = n.opt("labelsB")) s.basis_b = with_labels(s.basis_b, *l);
    const Index da = s.dim_a();
    const Index db = s.dim_b();

    const Node initial = n.at("initial");
    s.initial = parse_initial(initial, tl ? da : da * db);
    const Index expected = tl ? da : da * db;
    if (s.initial.dim() != expected) {
        initial.fail("state of dimension " + std::to_string(s.initial.dim()) + " where " + std::to_string(expected) +
                     " is required by the bases");
    }
    if (tl && da != db) n.at("basisB").fail("TL bases act on the same system and must have equal dimension");

    if (const auto e = n.opt("evolution")) {
        if (tl) {
            s.evolution = parse_unitary(*e, da);
        } else {
            e->only({"A", "B"});
            if (const auto a = e->opt("A")) s.evolution_a = parse_unitary(*a, da);
            if (const auto b = e->opt("B")) s.evolution_b = parse_unitary(*b, db);
        }
    } else {
        s.evolution = Operator::Identity(da, da);
    }
    if (tl && s.evolution.rows() != da) n.at("evolution").fail("evolution dimension does not match the bases");

    if (const auto h = n.opt("hamiltonian")) {
        if (tl) {
            s.hamiltonian = parse_hamiltonian(*h, da);
            if (s.hamiltonian->rows() != da) h->fail("Hamiltonian dimension does not match the system");
        } else {
            h->only({"A", "B"});
            if (const auto a = h->opt("A")) s.hamiltonian_a = parse_hamiltonian(*a, da);
            if (const auto b = h->opt("B")) s.hamiltonian_b = parse_hamiltonian(*b, db);
        }
    }

    if (const auto t = n.opt("timing")) s.timing = parse_timing(*t, s.kind, file.warnings);

    if (const auto b = n.opt("build")) {
        const std::string mode = b->str();
        if (mode == "instant") file.build = BuildMode::Instant;
        else if (mode == "fuzzy") file.build = BuildMode::Fuzzy;
        else if (mode == "timed") file.build = BuildMode::Timed;
        else if (mode == "auto") file.build = BuildMode::Auto;
        else b->fail("build must be instant, fuzzy, timed or auto");
        if ((file.build == BuildMode::Fuzzy || file.build == BuildMode::Timed) && !s.timing) {
            b->fail("build mode \"" + mode + "\" needs a timing section");
        }
    }

    if (const auto c = n.opt("chsh")) {
        c->only({"a", "a_prime", "b", "b_prime"});
        file.chsh = ChshSettings{parse_basis(c->at("a")), parse_basis(c->at("a_prime")), parse_basis(c->at("b")),
                                 parse_basis(c->at("b_prime"))};
    }

    at_node(n, [&] { s.validate(); return 0; });
    return file;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) throw FileError("cannot read " + path.string() + ": no such file");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
    return parse_scenario(read_text_file(path), path.string());
}

EventState build_scenario(const ScenarioFile& file) {
    const EventScenario& s = file.scenario;
    const bool tl = s.kind == EventKind::Timelike;
    switch (file.resolved_build()) {
    case BuildMode::Instant: return tl ? build_tl_instant(s) : build_sl_instant(s);
    case BuildMode::Fuzzy: return tl ? build_tl_fuzzy(s) : build_sl_fuzzy(s);
    case BuildMode::Timed: return build_timed_state(s);
    case BuildMode::Auto: break;
    }
    return build_event_state(s);
}

void save_state(const EventState& state, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileError("cannot write " + path.string());
    out << to_json(state).dump(1) << '\n';
    if (!out) throw FileError("write failed: " + path.string());
}

EventState load_state(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw SchemaError(path.string(), "/", line_of(text, e.byte == 0 ? 0 : e.byte - 1), std::string("invalid JSON: ") + e.what());
    }
    return state_from_json(j);
}

} // namespace eventstate
