#include "eventstate/serialization.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "eventstate/errors.hpp"

namespace eventstate {

namespace {

Json real_table(const Operator& op, bool imag) {
    Json rows = Json::array();
    for (Index i = 0; i < op.rows(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < op.cols(); ++j) row.push_back(imag ? op(i, j).imag() : op(i, j).real());
        rows.push_back(std::move(row));
    }
    return rows;
}

const Json& member(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw InvalidInput(std::string("missing field \"") + key + "\"");
    return j.at(key);
}

double number(const Json& j, const char* what) {
    if (!j.is_number()) throw InvalidInput(std::string(what) + " must be a number");
    return j.get<double>();
}

} // namespace

double round_significant(double x, int digits) {
    if (!std::isfinite(x)) return x;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    const double r = std::strtod(buf, nullptr);
    return r == 0.0 ? 0.0 : r;
}

Json rounded(const Json& j, int digits) {
    if (j.is_number_float()) return round_significant(j.get<double>(), digits);
    if (j.is_array()) {
        Json out = Json::array();
        for (const auto& v : j) out.push_back(rounded(v, digits));
        return out;
    }
    if (j.is_object()) {
        Json out = Json::object();
        for (const auto& [k, v] : j.items()) out[k] = rounded(v, digits);
        return out;
    }
    return j;
}

Json to_json(const Operator& op) {
    if (op.rows() != op.cols()) throw DimensionMismatch("operator JSON holds square matrices only");
    Json j;
    j["dim"] = op.rows();
    j["re"] = real_table(op, false);
    j["im"] = real_table(op, true);
    return j;
}

Json to_json(const Ket& psi) {
    Json j = Json::array();
    for (Index i = 0; i < psi.size(); ++i) j.push_back(Json::array({psi(i).real(), psi(i).imag()}));
    return j;
}

Json to_json(const MeasurementModel& basis) {
    Json j;
    j["labels"] = basis.labels();
    Json vectors = Json::array();
    for (Index i = 0; i < basis.dim(); ++i) vectors.push_back(to_json(Ket(basis.ket(i))));
    j["vectors"] = std::move(vectors);
    return j;
}

Json to_json(const TimingProfile& profile) {
    Json j;
    j["t0"] = profile.grid().t0;
    j["dt"] = profile.grid().dt;
    j["n_bins"] = profile.grid().n_bins;
    j["kind"] = profile.is_marginal() ? "marginal" : "conditional";
    const Operator a = profile.amplitudes();
    if (profile.is_marginal()) {
        Json re = Json::array();
        Json im = Json::array();
        for (Index k = 0; k < a.rows(); ++k) {
            re.push_back(a(k, 0).real());
            im.push_back(a(k, 0).imag());
        }
        j["re"] = std::move(re);
        j["im"] = std::move(im);
    } else {
        j["re"] = real_table(a, false);
        j["im"] = real_table(a, true);
    }
    return j;
}

Json to_json(const EventState& state) {
    Json j;
    j["format"] = kStateFormat;
    j["kind"] = to_string(state.kind);
    j["timer_bins"] = state.timer_bins;
    j["record_basisA"] = to_json(state.record_basis_a);
    j["record_basisB"] = to_json(state.record_basis_b);
    j["rho"] = to_json(state.rho.matrix());
    return j;
}

Json to_json(const BlochAngles& angles) {
    Json j;
    j["theta"] = angles.theta;
    j["phi"] = angles.phi;
    return j;
}

Operator operator_from_json(const Json& j) {
    const Json& re = member(j, "re");
    const Json& im = member(j, "im");
    if (!re.is_array() || !im.is_array() || re.size() != im.size() || re.empty()) {
        throw InvalidInput("operator: \"re\" and \"im\" must be tables of equal shape");
    }
    const auto rows = static_cast<Index>(re.size());
    const auto cols = static_cast<Index>(re.at(0).size());
    Operator op(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const Json& rr = re.at(static_cast<std::size_t>(r));
        const Json& ir = im.at(static_cast<std::size_t>(r));
        if (!rr.is_array() || !ir.is_array() || static_cast<Index>(rr.size()) != cols ||
            static_cast<Index>(ir.size()) != cols) {
            throw InvalidInput("operator: ragged table");
        }
        for (Index c = 0; c < cols; ++c) {
            op(r, c) = Complex(number(rr.at(static_cast<std::size_t>(c)), "operator entry"),
                               number(ir.at(static_cast<std::size_t>(c)), "operator entry"));
        }
    }
    if (rows != cols) throw InvalidInput("operator: table is not square");
    if (j.contains("dim") && j.at("dim") != rows) throw InvalidInput("operator: \"dim\" disagrees with the table");
    return op;
}

MeasurementModel basis_from_json(const Json& j) {
    const Json& vectors = member(j, "vectors");
    const Json& labels = member(j, "labels");
    if (!vectors.is_array() || vectors.empty() || !labels.is_array() || labels.size() != vectors.size()) {
        throw InvalidInput("basis: need as many labels as vectors");
    }
    const auto d = static_cast<Index>(vectors.size());
    Operator b(d, d);
    for (Index i = 0; i < d; ++i) {
        const Json& v = vectors.at(static_cast<std::size_t>(i));
        if (!v.is_array() || static_cast<Index>(v.size()) != d) throw InvalidInput("basis: vector of wrong length");
        for (Index k = 0; k < d; ++k) {
            const Json& c = v.at(static_cast<std::size_t>(k));
            if (!c.is_array() || c.size() != 2) throw InvalidInput("basis: components are [re, im] pairs");
            b(k, i) = Complex(number(c.at(0), "basis component"), number(c.at(1), "basis component"));
        }
    }
    std::vector<double> l;
    for (const auto& x : labels) l.push_back(number(x, "label"));
    return MeasurementModel(std::move(b), std::move(l));
}

EventState state_from_json(const Json& j) {
    if (!j.is_object() || j.value("format", std::string()) != kStateFormat) {
        throw InvalidInput(std::string("state file: expected format \"") + kStateFormat + "\"");
    }
    const Json& bins = member(j, "timer_bins");
    if (!bins.is_number_unsigned()) throw InvalidInput("state file: timer_bins must be a non-negative integer");
    EventState s;
    s.kind = event_kind_from_string(member(j, "kind").get<std::string>());
    s.timer_bins = bins.get<std::size_t>();
    s.record_basis_a = basis_from_json(member(j, "record_basisA"));
    s.record_basis_b = basis_from_json(member(j, "record_basisB"));
    s.rho = DensityMatrix(operator_from_json(member(j, "rho")));
    const Index expect = s.dim_a() * s.dim_b() *
                         static_cast<Index>(s.timed() ? s.timer_bins * s.timer_bins : 1);
    if (s.rho.dim() != expect) throw DimensionMismatch("state file: rho does not match its record bases and timers");
    return s;
}

} // namespace eventstate
