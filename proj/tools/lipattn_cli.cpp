// lipattn: command-line front end. Reports are JSON on stdout (or --out),
// a one-line summary goes to stderr. Exit codes: 0 pass, 1 invariant
// violation, 2 usage or config error.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "config.hpp"

using namespace lipattn;
using namespace lipattn::cli;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitViolation = 1;
constexpr int kExitConfig = 2;

struct Outcome {
  bool pass = true;
  json result = json::object();
  json violation;  // replayable instance, set when pass is false
  std::string summary;
};

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

bool quiet() {
  const char* level = std::getenv("LIPATTN_LOG_LEVEL");
  return level && std::string(level) == "quiet";
}

json provenance_json(const Provenance& p) {
  json j = {{"kind", to_string(p.kind)}};
  if (p.n_samples) j["n_samples"] = p.n_samples;
  if (p.kind == ProvenanceKind::Sampled) j["seed"] = p.seed;
  if (!p.note.empty()) j["note"] = p.note;
  return j;
}

json bound_json(const BoundReport& r) {
  json j = {{"theorem", to_string(r.theorem)},
            {"status", r.applicable() ? "ok" : "inapplicable"},
            {"formula", r.formula}};
  if (r.applicable()) j["value"] = r.value;
  json ing = json::object();
  for (const auto& [name, q] : r.ingredients)
    ing[name] = {{"value", q.value}, {"provenance", provenance_json(q.provenance)}};
  j["ingredients"] = ing;
  json as = json::array();
  for (const auto& a : r.assumptions)
    as.push_back({{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
  j["assumptions"] = as;
  return j;
}

json probe_json(const ProbeResult& r) {
  json j = {{"max_ratio", r.max_ratio},
            {"evaluated", r.evaluated},
            {"skipped_degenerate", r.skipped}};
  if (r.bound) {
    j["bound"] = *r.bound;
    j["max_ratio_over_bound"] = r.max_ratio_over_bound;
  }
  if (r.violations) j["violations"] = *r.violations;
  json qs = json::array();
  for (const auto& [q, v] : r.quantiles) qs.push_back({{"q", q}, {"ratio", v}});
  j["quantiles"] = qs;
  return j;
}

Perturbation parse_perturbation(const std::string& s) {
  for (auto p : {Perturbation::Resample, Perturbation::Jitter, Perturbation::DropPoint,
                 Perturbation::DuplicatePoint, Perturbation::Mixed})
    if (s == to_string(p)) return p;
  throw ConfigError("unknown perturbation '" + s + "'");
}

PointCloud random_cloud(Rng& rng, std::size_t n, std::size_t d, double lo, double hi) {
  std::vector<double> flat(n * d);
  for (auto& v : flat) v = rng.uniform(lo, hi);
  return PointCloud(d, std::move(flat));
}

json random_matrix_json(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  json m = json::array();
  for (std::size_t r = 0; r < rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < cols; ++c) row.push_back(rng.uniform(-scale, scale));
    m.push_back(row);
  }
  return m;
}

// Input cloud: the first input file, or n random points in the box.
PointCloud input_cloud(const RunConfig& c) {
  if (!c.inputs.empty()) {
    PointCloud x = read_cloud(c.inputs.front());
    if (x.dim() != c.dim)
      throw ConfigError("input has dimension " + std::to_string(x.dim()) + ", config says " +
                        std::to_string(c.dim));
    return x;
  }
  Rng rng = Rng(c.seed).split(0);
  return random_cloud(rng, c.n, c.dim, c.box_lo, c.box_hi);
}

SetMap make_layer(const RunConfig& c) {
  if (c.heads.empty() && c.ffn.empty()) return attention_layer(make_attention(c));
  return transformer_block(make_multi_head(c), make_ffn(c));
}

// ---------------------------------------------------------------------------

Outcome cmd_equiv(const RunConfig& c) {
  if (c.instances == 0 || c.max_dim == 0 || c.max_n == 0 || c.max_heads == 0)
    throw ConfigError("instances, max_dim, max_n and max_heads must be >= 1");
  const Rng root(c.seed);
  double worst = 0.0;
  json worst_instance;
  for (std::size_t i = 0; i < c.instances; ++i) {
    Rng rng = root.split(i);
    const auto d = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(c.max_dim)));
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(c.max_n)));
    const auto h = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(c.max_heads)));
    const PointCloud x = random_cloud(rng, n, d, -2.0, 2.0);

    json heads = json::array();
    for (std::size_t k = 0; k < h; ++k) {
      json pot;
      switch ((i + k) % 4) {
        case 0: pot = {{"kind", "gaussian"}}; break;
        case 1: pot = {{"kind", "dot_product"}, {"scale", rng.uniform(0.1, 1.0)}}; break;
        case 2: {
          const auto kd = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(d)));
          pot = {{"kind", "scaled_dot_product"},
                 {"W_Q", random_matrix_json(rng, kd, d, 1.0)},
                 {"W_K", random_matrix_json(rng, kd, d, 1.0)},
                 {"scale", 1.0 / std::sqrt(static_cast<double>(kd))}};
          break;
        }
        default: pot = {{"kind", "constant"}};
      }
      json look;
      std::size_t dv = d;
      // Sabotaged runs need a weight to perturb, so they always use W_V.
      switch (c.sabotage ? 2 : (i + 2 * k) % 3) {
        case 0: look = {{"kind", "identity"}}; break;
        case 1: look = {{"kind", "scaled_identity"}, {"alpha", rng.uniform(-1.0, 1.0)}}; break;
        default:
          dv = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(d)));
          look = {{"kind", "linear"}, {"W_V", random_matrix_json(rng, dv, d, 1.0)}};
      }
      heads.push_back({{"potential", pot}, {"lookup", look}, {"W_O", random_matrix_json(rng, dv, d, 1.0)}});
    }

    // Kernel pipeline on the declared instance; the reference sees the
    // sabotaged weights, if any.
    json ref_heads = heads;
    if (c.sabotage) ref_heads[0]["lookup"]["W_V"][0][0] = ref_heads[0]["lookup"]["W_V"][0][0].get<double>() + 1e-3;

    RunConfig inst = c;
    inst.dim = d;
    inst.heads = heads;
    const MultiHeadConfig mh = make_multi_head(inst);
    inst.heads = ref_heads;
    const MultiHeadConfig mh_ref = make_multi_head(inst);

    // Single head: the first head without W_O.
    const AttentionConfig& a = mh.heads.front().attention;
    const AttentionConfig& a_ref = mh_ref.heads.front().attention;
    const PointCloud single = self_attention(a, x);
    std::vector<Vec> vrows;
    for (std::size_t j = 0; j < n; ++j) vrows.push_back(a_ref.lookup(x.point(j)));
    const PointCloud values = PointCloud::from_rows(vrows);
    double dev = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const Vec r = reference_attention(a_ref.potential, x.point(j), x, values);
      for (std::size_t k = 0; k < r.size(); ++k) dev = std::max(dev, std::abs(r[k] - single.point(j)[k]));
    }
    const PointCloud multi = multi_head(mh, x);
    const PointCloud multi_ref = reference_multi_head(mh_ref, x);
    for (std::size_t k = 0; k < multi.flat().size(); ++k)
      dev = std::max(dev, std::abs(multi.flat()[k] - multi_ref.flat()[k]));

    if (i == 0 || dev > worst) {
      worst = dev;
      worst_instance = {{"index", i}, {"dim", d}, {"n", n}, {"heads", heads},
                        {"points", cloud_json(x)}, {"deviation", dev}};
    }
  }
  Outcome o;
  o.pass = worst <= 1e-10;
  o.result = {{"instances", c.instances}, {"max_abs_deviation", worst}, {"tolerance", 1e-10},
              {"sabotage", c.sabotage}, {"worst_instance", worst_instance}};
  if (!o.pass) o.violation = worst_instance;
  std::ostringstream s;
  s << "equiv: " << c.instances << " instances, max deviation " << worst;
  o.summary = s.str();
  return o;
}

Outcome cmd_w1(const RunConfig& c) {
  if (c.inputs.size() != 2) throw ConfigError("w1 needs exactly two point-cloud files");
  if (c.metric != "l1" && c.metric != "l2") throw ConfigError("metric must be l1 or l2");
  const PointCloud a = read_cloud(c.inputs[0]);
  const PointCloud b = read_cloud(c.inputs[1]);
  if (a.dim() != b.dim()) throw ConfigError("point clouds differ in dimension");
  const W1Result r = w1(a, b, c.metric == "l1" ? GroundMetric::L1 : GroundMetric::L2);
  Outcome o;
  o.result = {{"value", r.value}, {"dual_gap", r.dual_gap}, {"metric", c.metric},
              {"n", a.size()}, {"m", b.size()}};
  if (c.plan) {
    json rows = json::array();
    for (std::size_t i = 0; i < r.plan.rows; ++i) {
      json row = json::array();
      for (std::size_t j = 0; j < r.plan.cols; ++j) row.push_back(r.plan(i, j));
      rows.push_back(row);
    }
    o.result["plan"] = rows;
  }
  o.pass = std::abs(r.dual_gap) <= 1e-9 * std::max(1.0, r.value);
  if (!o.pass) o.violation = {{"a", cloud_json(a)}, {"b", cloud_json(b)}};
  o.summary = "w1: " + fmt(r.value);
  return o;
}

Outcome cmd_bound(const RunConfig& c) {
  const AttentionConfig cfg = make_attention(c);
  const SamplingConfig sampling{c.seed, 100000, 16, 200};
  BoundReport r;
  std::optional<double> repaired;
  if (c.theorem == "bounded") {
    r = bound_bounded_contraction(cfg, make_domain(c), sampling);
  } else if (c.theorem == "pointwise") {
    r = bound_pointwise_query(cfg, make_domain(c), sampling);
  } else if (c.theorem == "unbounded-gaussian" || c.theorem == "unbounded-equal-n") {
    if (!cfg.potential.is_gaussian()) throw ConfigError(c.theorem + " needs the gaussian potential");
    r = c.theorem == "unbounded-gaussian" ? bound_unbounded_gaussian(cfg.lookup, c.dim, c.n, c.m)
                                          : bound_unbounded_equal_n(cfg.lookup, c.dim, c.n);
  } else if (c.theorem == "cross-attention") {
    const DomainBox box = make_domain(c);
    const Vec q = c.query.empty() ? Vec(c.dim, 0.0) : c.query;
    if (q.size() != c.dim) throw ConfigError("query must have dim entries");
    if (!box.bounded()) throw ConfigError("cross-attention needs a box");
    const RegularityStats st = regularity_stats(cfg.potential, box, sampling);
    r = bound_cross_attention(cfg, box, q, st, sampling);
    if (r.applicable()) repaired = repaired_cross_attention(cfg, box, q, st, sampling);
  } else if (c.theorem == "components") {
    const DomainBox box = make_domain(c);
    if (!box.bounded()) throw ConfigError("components needs a box");
    r = component_taus(cfg, box, regularity_stats(cfg.potential, box, sampling));
  } else {
    throw ConfigError("unknown theorem '" + c.theorem + "'");
  }
  Outcome o;
  o.result = bound_json(r);
  if (repaired) o.result["repaired_value"] = *repaired;
  if (r.applicable()) {
    // The report must be reproducible from its own ingredients.
    const double again = recompute(r);
    o.result["recomputed"] = again;
    o.pass = std::abs(again - r.value) <= 1e-12 * std::max(1.0, std::abs(r.value));
    o.summary = "bound " + c.theorem + ": " + fmt(r.value);
  } else {
    o.summary = "bound " + c.theorem + ": inapplicable";
  }
  if (!o.pass) o.violation = o.result;
  return o;
}

Outcome cmd_probe(const RunConfig& c) {
  const AttentionConfig cfg = make_attention(c);
  ProbeConfig p;
  p.seed = c.seed;
  p.trials = c.trials;
  p.dim = c.dim;
  p.n_min = c.n_min;
  p.n_max = c.n_max;
  p.sampling_radius = c.radius;
  p.perturbation = parse_perturbation(c.perturbation);
  p.jitter_sigma = c.jitter;
  p.keep_ratios = !c.csv.empty();
  const bool unbounded_theorem = c.component.empty() && c.theorem == "unbounded-gaussian";
  p.domain = unbounded_theorem ? DomainBox::unbounded(c.dim) : make_domain(c);
  const SamplingConfig sampling{c.seed, 100000, 16, 200};
  try {
    p.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  ProbeResult r;
  std::string what;
  if (!c.component.empty()) {
    std::optional<Component> kind;
    for (auto k : {Component::SoftmatchInX, Component::SoftmatchInMeasure, Component::Projection,
                   Component::Lookup})
      if (c.component == to_string(k)) kind = k;
    if (!kind) throw ConfigError("unknown component '" + c.component + "'");
    r = probe_component(*kind, cfg, p, sampling);
    what = "component " + c.component;
  } else if (c.theorem == "bounded") {
    if (!p.domain.bounded()) throw ConfigError("the bounded theorem needs a box");
    r = probe_contraction(cfg, p, ProbeTheorem::Bounded, sampling);
  } else if (c.theorem == "unbounded-gaussian") {
    if (!cfg.potential.is_gaussian()) throw ConfigError("unbounded-gaussian needs the gaussian potential");
    r = probe_contraction(cfg, p, ProbeTheorem::UnboundedGaussian, sampling);
  } else if (c.theorem == "none") {
    r = probe_contraction(cfg, p, ProbeTheorem::None, sampling);
  } else if (c.theorem == "cross-attention" || c.theorem == "cross-attention-repaired") {
    if (!p.domain.bounded()) throw ConfigError("cross-attention needs a box");
    r = probe_cross_attention(cfg, p, sampling,
                              c.theorem == "cross-attention" ? CrossBound::Stated : CrossBound::Repaired);
  } else {
    throw ConfigError("unknown theorem '" + c.theorem + "'");
  }
  if (what.empty()) what = c.theorem;

  if (!c.csv.empty()) {
    std::ostringstream s;
    s << "trial_order,ratio\n";
    s.precision(17);
    for (std::size_t i = 0; i < r.ratios.size(); ++i) s << i << ',' << r.ratios[i] << '\n';
    write_text(c.csv, s.str());
  }
  Outcome o;
  o.result = probe_json(r);
  o.result["target"] = what;
  o.pass = r.violations.value_or(0) == 0;
  if (r.worst_trial) {
    json worst = {{"trial", *r.worst_trial}, {"ratio", r.worst_ratio}, {"bound", r.worst_bound}};
    if (r.worst_x) worst["x"] = cloud_json(*r.worst_x);
    if (r.worst_y) worst["y"] = cloud_json(*r.worst_y);
    if (r.worst_query) worst["query"] = *r.worst_query;
    o.result["worst_instance"] = worst;
    if (!o.pass) o.violation = worst;
  }
  std::ostringstream s;
  s << "probe " << what << ": " << r.evaluated << " pairs, max ratio " << r.max_ratio;
  if (r.bound) s << ", bound " << *r.bound << ", violations " << r.violations.value_or(0);
  o.summary = s.str();
  return o;
}

Outcome cmd_dynamics(const RunConfig& c) {
  const SetMap layer = make_layer(c);
  const PointCloud x0 = input_cloud(c);
  const Trajectory t = run_particles({layer}, x0, c.steps);
  bool finite = true;
  std::ostringstream lines;
  lines.precision(17);
  for (std::size_t h = 0; h < t.states.size(); ++h) {
    finite = finite && all_finite(t.states[h].flat());
    json line = {{"step", h}, {"points", cloud_json(t.states[h])}};
    if (h < t.per_step_w1.size()) line["w1_to_next"] = t.per_step_w1[h];
    lines << line.dump() << '\n';
  }
  if (!c.jsonl.empty()) write_text(c.jsonl, lines.str());
  Outcome o;
  o.result = {{"steps", c.steps}, {"n", x0.size()}, {"per_step_w1", t.per_step_w1},
              {"final", cloud_json(t.states.back())},
              {"final_barycenter", barycenter(empirical(t.states.back()))}};
  o.pass = finite;
  if (!o.pass) o.violation = {{"x0", cloud_json(x0)}};
  o.summary = "dynamics: " + std::to_string(c.steps) + " steps, last W1 step " +
              (t.per_step_w1.empty() ? std::string("n/a") : fmt(t.per_step_w1.back()));
  return o;
}

Outcome cmd_deq(const RunConfig& c) {
  if (c.inits == 0) throw ConfigError("inits must be >= 1");
  const SetMap g = make_layer(c);
  const PointCloud x = input_cloud(c);
  const Rng root(c.seed);
  std::vector<DeqResult> runs;
  json run_json = json::array();
  double rate = 0.0;
  bool converged = true;
  for (std::size_t k = 0; k < c.inits; ++k) {
    Rng rng = root.split(1000 + k);
    const PointCloud h0 = random_cloud(rng, x.size(), x.dim(), c.box_lo, c.box_hi);
    runs.push_back(deq_solve(g, x, h0, injection::AddInput{}, c.tol, c.max_iter));
    const DeqResult& r = runs.back();
    converged = converged && r.converged;
    rate = std::max(rate, r.contraction_estimate);
    run_json.push_back({{"iterations", r.iterations}, {"residual", r.residual},
                        {"converged", r.converged}, {"contraction_estimate", r.contraction_estimate}});
  }
  double separation = 0.0;
  for (std::size_t k = 1; k < runs.size(); ++k)
    separation = std::max(separation, sup_l1(runs[k].h_star, runs[0].h_star));
  // Each iterate is within tol / (1 - rate) of the fixed point.
  const double allowed = rate < 1.0 ? 10.0 * c.tol / (1.0 - rate) : 0.0;
  Outcome o;
  o.pass = converged && rate < 1.0 && separation <= allowed;
  o.result = {{"runs", run_json}, {"max_separation", separation}, {"allowed_separation", allowed},
              {"contraction_estimate", rate}, {"h_star", cloud_json(runs[0].h_star)}};
  if (!o.pass) o.violation = {{"x", cloud_json(x)}};
  std::ostringstream s;
  s << "deq: " << (converged ? "converged" : "not converged") << ", rate " << rate
    << ", separation " << separation;
  o.summary = s.str();
  return o;
}

Outcome cmd_invert(const RunConfig& c) {
  const SetMap g = make_layer(c);
  std::optional<PointCloud> truth;
  PointCloud y = input_cloud(c);
  if (c.inputs.empty()) {
    truth = y;
    y = residual_forward(g, *truth);
  }
  Outcome o;
  // Uniqueness of the preimage needs Lip(g) < 1 as a map on clouds; the
  // measure-level bounds do not give that, so it is sampled directly.
  bool gate = true;
  if (make_domain(c).bounded()) {
    const SetMapLip lip = estimate_set_map_lip(g, make_domain(c), y.size(), 200, c.seed);
    gate = lip.estimate < 1.0;
    o.result["sampled_lip"] = lip.estimate;
    o.result["sampled_lip_provenance"] = provenance_json(lip.provenance);
  }
  o.result["lip_gate"] = gate;
  const InvertResult r = invert_residual(g, y, c.tol, c.max_iter);
  o.result["iterations"] = r.iterations;
  o.result["residual"] = r.residual;
  o.result["converged"] = r.converged;
  o.result["x"] = cloud_json(r.x);
  if (truth) o.result["error_vs_truth"] = sup_l1(r.x, *truth);
  o.pass = r.converged && gate;
  if (!o.pass) o.violation = {{"y", cloud_json(y)}};
  o.summary = "invert: " + std::string(r.converged ? "converged" : "not converged") + " in " +
              std::to_string(r.iterations) + " iterations, residual " + fmt(r.residual);
  return o;
}

Outcome cmd_lemmas(const RunConfig& c) {
  const bool all = !c.ratio && !c.product && !c.local_lip;
  Outcome o;
  std::ostringstream s;
  s << "lemmas:";
  if (all || c.ratio) {
    const RatioLemmaReport r = check_ratio_lemma(c.nmax, c.grid, c.restarts, c.seed);
    std::size_t failing = 0;
    json rows = json::array();
    for (const auto& row : r.rows) {
      const bool ok = row.within_bound && row.full_not_above_reduced;
      if (!ok) {
        ++failing;
        rows.push_back({{"n", row.n}, {"max_reduced", row.max_reduced},
                        {"max_full", row.max_full}, {"bound", row.bound}});
      }
    }
    o.result["ratio"] = {{"n_max", c.nmax}, {"pass", r.pass}, {"failing_n", failing},
                         {"worst_bound_gap", r.worst_bound_gap}, {"worst_excess", r.worst_excess},
                         {"failures", rows}};
    if (!r.pass) o.violation["ratio"] = rows;
    o.pass = o.pass && r.pass;
    s << " ratio " << (r.pass ? "pass" : "FAIL");
  }
  if (all || c.product) {
    const ProductLemmaReport r = check_product_lemma(c.trials, 4, c.seed);
    o.result["product"] = {{"trials", r.trials}, {"violations", r.violations},
                           {"max_excess", r.max_excess}, {"mean_tightness", r.mean_tightness},
                           {"pass", r.pass}};
    o.pass = o.pass && r.pass;
    s << " product " << (r.pass ? "pass" : "FAIL");
  }
  if (all || c.local_lip) {
    const LocalLipReport r = check_local_lip_lemma(c.trials, c.samples, c.seed);
    o.result["local_lip"] = {{"trials", r.trials}, {"failures", r.failures},
                             {"max_rel_error_unrestricted", r.max_rel_error_unrestricted},
                             {"max_rel_error_restricted", r.max_rel_error_restricted},
                             {"pass", r.pass}};
    o.pass = o.pass && r.pass;
    s << " local-lip " << (r.pass ? "pass" : "FAIL");
  }
  if (!o.pass) o.violation["seed"] = c.seed;
  o.summary = s.str();
  return o;
}

Outcome dispatch(const RunConfig& c) {
  if (c.command == "equiv") return cmd_equiv(c);
  if (c.command == "w1") return cmd_w1(c);
  if (c.command == "bound") return cmd_bound(c);
  if (c.command == "probe") return cmd_probe(c);
  if (c.command == "dynamics") return cmd_dynamics(c);
  if (c.command == "deq") return cmd_deq(c);
  if (c.command == "invert") return cmd_invert(c);
  if (c.command == "lemmas") return cmd_lemmas(c);
  throw ConfigError("unknown command '" + c.command + "'");
}

// ---------------------------------------------------------------------------

void model_options(CLI::App* sub, RunConfig& c, std::string& potential, std::string& lookup) {
  sub->add_option("--potential", potential, "gaussian | constant | dot | dot:<scale> | JSON spec");
  sub->add_option("--lookup", lookup, "identity | scale:<alpha> | JSON spec");
  sub->add_option("--dim", c.dim, "point dimension");
  sub->add_option("--box-lo", c.box_lo, "lower corner of the cube domain");
  sub->add_option("--box-hi", c.box_hi, "upper corner of the cube domain");
  sub->add_flag("--unbounded", c.unbounded, "domain is all of R^d");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig c;
  std::string config_path, potential, lookup;

  CLI::App app{"Lipschitz and Wasserstein analysis of measure-theoretic attention"};
  app.set_version_flag("--version", std::string(kVersion));
  app.add_option("--config", config_path, "JSON file; its fields override flags");
  app.add_option("--out", c.out, "write the JSON report here instead of stdout");
  app.add_option("--seed", c.seed, "root seed for every random draw");
  app.require_subcommand(0, 1);
  app.fallthrough();

  auto* equiv = app.add_subcommand("equiv", "kernel vs matrix attention on random instances");
  equiv->add_option("--instances", c.instances);
  equiv->add_option("--max-dim", c.max_dim);
  equiv->add_option("--max-n", c.max_n);
  equiv->add_option("--max-heads", c.max_heads);
  equiv->add_flag("--sabotage", c.sabotage, "perturb one weight on the reference side");

  auto* w1c = app.add_subcommand("w1", "exact W1 between two point clouds (CSV or JSON)");
  w1c->add_option("inputs", c.inputs, "two point-cloud files")->expected(2);
  w1c->add_option("--metric", c.metric, "l1 | l2");
  w1c->add_flag("--plan", c.plan, "include the transport plan");

  auto* bound = app.add_subcommand("bound", "evaluate a Lipschitz bound with provenance");
  model_options(bound, c, potential, lookup);
  bound->add_option("--theorem", c.theorem,
                    "bounded | pointwise | unbounded-gaussian | unbounded-equal-n | "
                    "cross-attention | components");
  bound->add_option("--n", c.n);
  bound->add_option("--m", c.m);
  bound->add_option("--query", c.query, "query point for cross-attention");

  auto* probe = app.add_subcommand("probe", "sampled contraction ratios against a bound");
  model_options(probe, c, potential, lookup);
  probe->add_option("--theorem", c.theorem,
                    "bounded | unbounded-gaussian | none | cross-attention | cross-attention-repaired");
  probe->add_option("--component", c.component,
                    "softmatch_in_x | softmatch_in_measure | projection | lookup");
  probe->add_option("--trials", c.trials);
  probe->add_option("--n-min", c.n_min);
  probe->add_option("--n-max", c.n_max);
  probe->add_option("--radius", c.radius, "sampling radius on unbounded domains");
  probe->add_option("--perturbation", c.perturbation,
                    "resample | jitter | drop_point | duplicate_point | mixed");
  probe->add_option("--jitter", c.jitter);
  probe->add_option("--csv", c.csv, "dump every ratio here");

  auto* dyn = app.add_subcommand("dynamics", "iterate a layer as a particle system");
  auto* deq = app.add_subcommand("deq", "deep-equilibrium fixed point from several starts");
  auto* inv = app.add_subcommand("invert", "invert x + g(x) = y by fixed-point iteration");
  for (auto* sub : {dyn, deq, inv}) {
    model_options(sub, c, potential, lookup);
    sub->add_option("--input", c.inputs, "point-cloud file (default: random cloud in the box)")
        ->expected(1);
    sub->add_option("--n", c.n, "random cloud size");
  }
  dyn->add_option("--steps", c.steps);
  dyn->add_option("--jsonl", c.jsonl, "trajectory, one state per line");
  for (auto* sub : {deq, inv}) {
    sub->add_option("--tol", c.tol);
    sub->add_option("--max-iter", c.max_iter);
  }
  deq->add_option("--inits", c.inits, "number of random starting points");

  auto* lem = app.add_subcommand("lemmas", "numerical checks of the auxiliary lemmas");
  lem->add_flag("--ratio", c.ratio);
  lem->add_flag("--product", c.product);
  lem->add_flag("--local-lip", c.local_lip);
  lem->add_option("--nmax", c.nmax);
  lem->add_option("--grid", c.grid);
  lem->add_option("--restarts", c.restarts);
  lem->add_option("--trials", c.trials);
  lem->add_option("--samples", c.samples);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfig;
  }

  json report;
  Outcome outcome;
  try {
    if (auto subs = app.get_subcommands(); !subs.empty()) c.command = subs.front()->get_name();
    if (!potential.empty()) c.potential = parse_potential_flag(potential);
    if (!lookup.empty()) c.lookup = parse_lookup_flag(lookup);
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot open config '" + config_path + "'");
      json j;
      try {
        j = json::parse(in);
      } catch (const json::exception& e) {
        throw ConfigError("config '" + config_path + "': " + e.what());
      }
      const std::string chosen = c.command;
      apply_json(c, j);
      if (!chosen.empty() && c.command != chosen)
        throw ConfigError("config command '" + c.command + "' differs from subcommand '" + chosen + "'");
    }
    if (c.command.empty()) throw ConfigError("no command given");
    outcome = dispatch(c);
  } catch (const ConfigError& e) {
    std::cerr << "lipattn: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "lipattn: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "lipattn: " << to_string(e.code()) << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "lipattn: bad value: " << e.what() << '\n';
    return kExitConfig;
  }

  report = {{"command", c.command},     {"version", kVersion},
            {"seed", c.seed},           {"config_hash", config_hash(c)},
            {"config", to_json(c)},     {"pass", outcome.pass},
            {"result", outcome.result}};
  if (!outcome.pass) report["violation"] = outcome.violation;
  const std::string text = report.dump(2) + '\n';
  try {
    if (c.out.empty())
      std::cout << text;
    else
      write_text(c.out, text);
  } catch (const ConfigError& e) {
    std::cerr << "lipattn: " << e.what() << '\n';
    return kExitConfig;
  }
  if (!quiet()) std::cerr << outcome.summary << (outcome.pass ? "" : "  [VIOLATION]") << '\n';
  return outcome.pass ? kExitPass : kExitViolation;
}
