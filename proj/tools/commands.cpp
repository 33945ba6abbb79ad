#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "eventstate/bell.hpp"
#include "eventstate/errors.hpp"
#include "eventstate/event_states.hpp"
#include "eventstate/inference.hpp"
#include "eventstate/scenario_io.hpp"
#include "eventstate/timing.hpp"
#include "eventstate/witnesses.hpp"

namespace eventstate::cli {

namespace {

Json grid_json(const TimeGrid& g) {
    Json j;
    j["t0"] = g.t0;
    j["dt"] = g.dt;
    j["n_bins"] = g.n_bins;
    return j;
}

Json measurement_json(const ProjectiveMeasurement& m, const std::optional<BlochAngles>& bloch) {
    Json j;
    j["bloch"] = bloch ? to_json(*bloch) : Json(nullptr);
    Json ps = Json::array();
    for (const Operator& p : m.projectors()) ps.push_back(to_json(p));
    j["projectors"] = std::move(ps);
    return j;
}

JointTimeDistribution scenario_times(const EventScenario& s) {
    if (!s.timing) throw InvalidInput("time correlation needs a timing section");
    const TimingSpec& t = *s.timing;
    if (t.joint_amplitude) return joint_time_distribution(t.grid(), *t.joint_amplitude, s.kind);
    return joint_time_distribution(t.profile_a, t.profile_b, s.kind);
}

Json prediction_json(const ConditionalDecomposition& d) {
    const Prediction pred = predict_future_outcome(d);
    Json j;
    j["kind"] = to_string(d.kind);
    Json outcomes = Json::array();
    for (std::size_t b = 0; b < d.branches.size(); ++b) {
        Json o;
        o["label"] = d.record_basis_b.labels()[b];
        o["probability"] = d.branches[b].probability;
        o["omitted"] = d.branches[b].omitted;
        outcomes.push_back(std::move(o));
    }
    j["outcomes"] = std::move(outcomes);
    j["p_suc"] = pred.p_suc ? Json(*pred.p_suc) : Json(nullptr);
    j["pure_formula"] = pred.used_pure_formula;
    j["partial"] = pred.partial;
    j["measurement"] = pred.measurement ? measurement_json(*pred.measurement, pred.bloch) : Json(nullptr);
    Json pairs = Json::array();
    for (const PairwiseBound& p : pred.pairwise) {
        Json q;
        q["first"] = p.first;
        q["second"] = p.second;
        q["p_suc"] = p.p_suc;
        pairs.push_back(std::move(q));
    }
    j["pairwise"] = std::move(pairs);
    if (d.kind == EventKind::Timelike && d.has_lambdas()) {
        const DeterminismCheck det = determinism_check(d);
        j["lambda_overlap"] = det.max_off_diagonal;
        j["deterministic"] = det.deterministic;
    }
    return j;
}

Json chsh_json(const ChshReport& r) {
    Json j;
    j["E"] = Json::array({r.correlators[0], r.correlators[1], r.correlators[2], r.correlators[3]});
    j["S"] = r.s;
    j["tsirelson_ok"] = r.tsirelson_ok;
    return j;
}

Json demo_appendix_e() {
    const Ket plus_x = (Ket(2) << 1.0, 1.0).finished() / std::sqrt(2.0);
    // exp(i pi sigma_x / 4) is a rotation by -pi/2 about x.
    const EventScenario s = EventScenario::timelike(plus_x, MeasurementModel::named("Sz"), MeasurementModel::named("Sy"),
                                                    rotation('x', -std::numbers::pi / 2));
    const EventState state = build_tl_instant(s);
    const MeasurementModel sz = MeasurementModel::named("Sz");
    const MeasurementModel sy = MeasurementModel::named("Sy");
    const Operator expected = 0.5 * (tensor_product(sz.projector(0), sy.projector(0)) +
                                     tensor_product(sz.projector(1), sy.projector(1)));
    const ConditionalDecomposition d = conditional_decomposition(state);
    Json j;
    j["demo"] = "appendix-e";
    j["rho_error"] = (state.rho.matrix() - expected).cwiseAbs().maxCoeff();
    const Json pred = prediction_json(d);
    j["lambda_overlap"] = pred.at("lambda_overlap");
    j["p_suc"] = pred.at("p_suc");
    j["C_A"] = classical_correlation(state).c_a;
    j["deterministic"] = pred.at("deterministic");
    return j;
}

Json demo_hadamard_tl() {
    const Ket plus_x = (Ket(2) << 1.0, 1.0).finished() / std::sqrt(2.0);
    const MeasurementModel sz = MeasurementModel::named("Sz");
    const CoherenceWitness tl = coherence_witness(build_tl_instant(EventScenario::timelike(plus_x, sz, sz, hadamard())));
    const CoherenceWitness sl =
        coherence_witness(build_sl_instant(EventScenario::spacelike(tensor_product(plus_x, plus_x), sz, sz)));
    Json j;
    j["demo"] = "hadamard-tl";
    j["TL_c_rel"] = tl.c_rel;
    j["TL_verdict"] = to_string(tl.verdict);
    j["SL_c_rel"] = sl.c_rel;
    j["SL_verdict"] = to_string(sl.verdict);
    return j;
}

Json demo_decay(const DemoOptions& o) {
    if (!(o.gamma > 0.0) || !(o.dt > 0.0)) throw InvalidInput("decay demo: gamma and dt must be positive");
    // Appendix A: branching with dp = gamma dt against the continuum |chi(t)|^2 = gamma exp(-gamma t).
    const TimeGrid grid = grid_for_exponential(o.gamma, o.dt);
    const BranchingSchedule schedule = BranchingSchedule::from_rate(o.gamma, grid);
    Eigen::VectorXcd chi(static_cast<Index>(grid.n_bins));
    for (std::size_t k = 0; k < grid.n_bins; ++k) {
        chi(static_cast<Index>(k)) = std::sqrt(o.gamma) * std::exp(-0.5 * o.gamma * grid.time(k));
    }
    const ContinuumCheck cc = continuum_limit_check(schedule, TimingProfile::marginal(grid, chi));

    // Covariances use a grid no finer than 0.01 so the TL table stays small.
    const TimeGrid tc = grid_for_exponential(o.gamma, std::max(o.dt, 0.01));
    const ExponentialProfile a = exponential_profile(o.gamma, tc);
    const JointTimeDistribution tl =
        joint_time_distribution(a.profile, conditional_exponential_profile(o.gamma, tc), EventKind::Timelike);
    const JointTimeDistribution sl = joint_time_distribution(a.profile, a.profile, EventKind::Spacelike);
    Json j;
    j["demo"] = "decay";
    j["gamma"] = o.gamma;
    j["dt"] = o.dt;
    j["continuum_max_relative_error"] = cc.max_relative_error;
    j["continuum_bins_compared"] = cc.bins_compared;
    j["correlation_grid"] = grid_json(tc);
    j["TL_time_correlation"] = time_correlation(tl);
    j["TL_expected"] = 1.0 / (o.gamma * o.gamma);
    j["SL_time_correlation"] = time_correlation(sl);
    Json warnings = Json::array();
    for (const auto& w : schedule.warnings()) warnings.push_back(w);
    for (const auto& w : a.warnings) warnings.push_back(w);
    j["warnings"] = std::move(warnings);
    return j;
}

Json demo_bell_sl() {
    const Ket singlet = (Ket(4) << 0.0, 1.0, -1.0, 0.0).finished() / std::sqrt(2.0);
    const double deg = std::numbers::pi / 180.0;
    const EventScenario base = EventScenario::spacelike(singlet, MeasurementModel::named("Sz"), MeasurementModel::named("Sz"));
    const ChshSettings settings{plane_setting(0.0), plane_setting(90 * deg), plane_setting(45 * deg),
                                plane_setting(-45 * deg)};
    Json j;
    j["demo"] = "bell-sl";
    j["settings_deg"] = Json::array({0, 90, 45, -45});
    const Json r = chsh_json(chsh_value(chsh_family(base, settings)));
    for (const auto& [k, v] : r.items()) j[k] = v;
    return j;
}

std::string format_number(double x) {
    char buf[64];
    if (x == 0.0 || std::abs(x) >= 0.01) {
        std::snprintf(buf, sizeof buf, "%.4f", x == 0.0 ? 0.0 : x);
    } else {
        std::snprintf(buf, sizeof buf, "%.3e", x);
    }
    return buf;
}

std::string scalar_text(const Json& v) {
    if (v.is_null()) return "n/a";
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_float()) return format_number(v.get<double>());
    if (v.is_number()) return v.dump();
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

void flatten(const Json& j, const std::string& prefix, std::vector<std::pair<std::string, const Json*>>& rows) {
    if (j.is_object() && !j.empty()) {
        for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, rows);
    } else if (j.is_array() && !j.empty()) {
        for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), rows);
    } else {
        rows.emplace_back(prefix, &j);
    }
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += (c == '"') ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

std::string unit_suffix(const std::string& key) {
    const auto dot = key.rfind('.');
    const std::string leaf = dot == std::string::npos ? key : key.substr(dot + 1);
    return (leaf == "C_A" || leaf.ends_with("c_rel")) ? " bit" : "";
}

} // namespace

Json cmd_validate(const std::string& path) {
    const ScenarioFile f = load_scenario(path);
    const EventState state = build_scenario(f);
    const DensityReport report = validate_density(state.rho.matrix());
    if (!report.passed()) throw NumericalFailure("built state is not a density matrix: " + report.summary());
    Json j;
    j["file"] = path;
    j["kind"] = to_string(f.scenario.kind);
    j["dimA"] = f.scenario.dim_a();
    j["dimB"] = f.scenario.dim_b();
    j["build"] = to_string(f.resolved_build());
    j["timing"] = f.scenario.timing ? grid_json(f.scenario.timing->grid()) : Json(nullptr);
    j["chsh"] = f.chsh.has_value();
    j["state_dim"] = state.rho.dim();
    j["trace_defect"] = report.trace_defect;
    j["min_eigenvalue"] = report.min_eigenvalue;
    j["warnings"] = f.warnings;
    j["valid"] = true;
    return j;
}

Json cmd_build(const std::string& path, const std::optional<std::string>& out_path) {
    const ScenarioFile f = load_scenario(path);
    const EventState state = build_scenario(f);
    const DensityReport report = validate_density(state.rho.matrix());
    if (!report.passed()) throw NumericalFailure("built state is not a density matrix: " + report.summary());
    Json j;
    j["file"] = path;
    j["kind"] = to_string(state.kind);
    j["build"] = to_string(f.resolved_build());
    j["dim"] = state.rho.dim();
    j["timer_bins"] = state.timer_bins;
    j["trace_defect"] = report.trace_defect;
    j["min_eigenvalue"] = report.min_eigenvalue;
    if (out_path) {
        save_state(state, *out_path);
        j["out"] = *out_path;
    } else {
        j["state"] = to_json(state);
    }
    return j;
}

Json cmd_witness(const std::string& path, const std::string& kind) {
    const ScenarioFile f = load_scenario(path);
    Json j;
    j["file"] = path;
    j["kind"] = to_string(f.scenario.kind);
    if (kind == "coherence") {
        const CoherenceWitness w = coherence_witness(build_scenario(f));
        j["witness"] = "coherence";
        j["c_rel"] = w.c_rel;
        j["verdict"] = to_string(w.verdict);
    } else if (kind == "timecorr") {
        const JointTimeDistribution dist = scenario_times(f.scenario);
        const ChebyshevCheck c = chebyshev_check(dist);
        j["witness"] = "timecorr";
        j["grid"] = grid_json(dist.grid);
        j["C"] = c.correlation;
        j["nonneg"] = c.nonneg;
        j["monotone_conditional_mean"] = c.monotone_conditional_mean;
        j["verdict"] = to_string(std::abs(c.correlation) > kWitnessThreshold ? Verdict::CausalSignature
                                                                             : Verdict::NoSignature);
    } else {
        throw InvalidInput("unknown witness kind \"" + kind + "\" (use coherence or timecorr)");
    }
    return j;
}

Json cmd_discriminate(const std::string& path) {
    const ScenarioFile f = load_scenario(path);
    Json j;
    j["file"] = path;
    const Json pred = prediction_json(conditional_decomposition(build_scenario(f)));
    for (const auto& [k, v] : pred.items()) j[k] = v;
    return j;
}

Json cmd_classical_corr(const std::string& path) {
    const ScenarioFile f = load_scenario(path);
    const ClassicalCorrelation c = classical_correlation(build_scenario(f));
    Json j;
    j["file"] = path;
    j["kind"] = to_string(f.scenario.kind);
    j["C_A"] = c.c_a;
    j["measurement"] = measurement_json(c.measurement, c.bloch);
    return j;
}

Json cmd_chsh(const std::string& path) {
    const ScenarioFile f = load_scenario(path);
    if (!f.chsh) throw InvalidInput(path + ": no \"chsh\" settings in the scenario");
    return chsh_json(chsh_value(chsh_family(f.scenario, *f.chsh), f.resolved_build() == BuildMode::Timed));
}

Json cmd_demo(const std::string& name, const DemoOptions& options) {
    if (name == "appendix-e") return demo_appendix_e();
    if (name == "decay") return demo_decay(options);
    if (name == "hadamard-tl") return demo_hadamard_tl();
    if (name == "bell-sl") return demo_bell_sl();
    throw InvalidInput("unknown demo \"" + name + "\" (use appendix-e, decay, hadamard-tl, bell-sl)");
}

void render(const Json& report, Format format, std::ostream& out) {
    const Json r = rounded(report);
    if (format == Format::Json) {
        out << r.dump(2) << '\n';
        return;
    }
    std::vector<std::pair<std::string, const Json*>> rows;
    flatten(r, "", rows);
    if (format == Format::Csv) {
        out << "parameter,value\n";
        for (const auto& [k, v] : rows) {
            out << csv_field(k) << ',' << csv_field(v->is_string() ? v->get<std::string>() : v->dump()) << '\n';
        }
        return;
    }
    for (const auto& [k, v] : rows) out << k << " = " << scalar_text(*v) << unit_suffix(k) << '\n';
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const FileError*>(&e)) return kMissingFile;
    if (dynamic_cast<const InvalidInput*>(&e) || dynamic_cast<const Json::exception*>(&e)) return kValidation;
    return kNumerical;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Event density matrices for pairs of measurement events", "eventstate"};
    app.require_subcommand(1);
    app.fallthrough();
    bool json = false;
    bool csv = false;
    app.add_flag("--json", json, "Machine-readable JSON output");
    app.add_flag("--csv", csv, "parameter,value CSV output");

    std::string path;
    std::optional<std::string> out_path;
    std::string witness_kind = "coherence";
    std::string demo_name;
    DemoOptions demo;

    auto* validate = app.add_subcommand("validate", "Check a scenario file and the state it builds");
    validate->add_option("scenario", path, "Scenario JSON")->required();
    auto* build = app.add_subcommand("build", "Build the event state of a scenario");
    build->add_option("scenario", path, "Scenario JSON")->required();
    build->add_option("--out", out_path, "Write the state to this file");
    auto* witness = app.add_subcommand("witness", "Evaluate a causality witness");
    witness->add_option("scenario", path, "Scenario JSON")->required();
    witness->add_option("--kind", witness_kind, "coherence or timecorr")
        ->check(CLI::IsMember({"coherence", "timecorr"}));
    auto* discriminate = app.add_subcommand("discriminate", "Predict B's record from A's conditional states");
    discriminate->add_option("scenario", path, "Scenario JSON")->required();
    auto* classical = app.add_subcommand("classical-corr", "Classical correlation C_A");
    classical->add_option("scenario", path, "Scenario JSON")->required();
    auto* chsh = app.add_subcommand("chsh", "Event-based CHSH value");
    chsh->add_option("scenario", path, "Scenario JSON with a chsh section")->required();
    auto* demo_cmd = app.add_subcommand("demo", "Run a bundled scenario");
    demo_cmd->add_option("name", demo_name, "appendix-e, decay, hadamard-tl or bell-sl")
        ->required()
        ->check(CLI::IsMember({"appendix-e", "decay", "hadamard-tl", "bell-sl"}));
    demo_cmd->add_option("--gamma", demo.gamma, "Decay rate (decay demo)");
    demo_cmd->add_option("--dt", demo.dt, "Grid step (decay demo)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kValidation;
    }
    if (json && csv) {
        err << "error: --json and --csv are exclusive\n";
        return kValidation;
    }
    const Format format = json ? Format::Json : csv ? Format::Csv : Format::Text;

    try {
        Json report;
        if (validate->parsed()) report = cmd_validate(path);
        else if (build->parsed()) report = cmd_build(path, out_path);
        else if (witness->parsed()) report = cmd_witness(path, witness_kind);
        else if (discriminate->parsed()) report = cmd_discriminate(path);
        else if (classical->parsed()) report = cmd_classical_corr(path);
        else if (chsh->parsed()) report = cmd_chsh(path);
        else report = cmd_demo(demo_name, demo);
        render(report, format, out);
        return kOk;
    } catch (const std::exception& e) {
        const int code = exit_code_for(e);
        err << (code == kNumerical ? "numerical failure: " : "error: ") << e.what() << '\n';
        return code;
    }
}

} // namespace eventstate::cli
