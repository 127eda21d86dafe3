#pragma once

// Run configuration for the command-line tool: flag defaults, JSON overrides
// with unknown keys rejected, potential/lookup specs, and point-cloud I/O.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lipattn/lipattn.hpp"

namespace lipattn::cli {

using nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::vector<std::string> inputs;
  std::string out;
  std::uint64_t seed = 7;

  // Model.
  json potential = {{"kind", "gaussian"}};
  json lookup = {{"kind", "identity"}};
  json heads = json::array();  // [{potential, lookup, W_O}]; empty = single head
  json ffn = json::array();    // [{W, b, activation}]
  std::size_t dim = 2;
  double box_lo = -1.0;
  double box_hi = 1.0;
  bool unbounded = false;
  std::vector<double> query;

  // equiv
  std::size_t instances = 100;
  std::size_t max_dim = 8;
  std::size_t max_n = 16;
  std::size_t max_heads = 4;
  bool sabotage = false;

  // w1
  std::string metric = "l1";
  bool plan = false;

  // bound / probe
  std::string theorem = "bounded";
  std::string component;
  std::size_t n = 8;
  std::size_t m = 8;
  std::size_t trials = 1000;
  std::size_t n_min = 2;
  std::size_t n_max = 16;
  double radius = 5.0;
  std::string perturbation = "mixed";
  double jitter = 0.1;
  std::string csv;

  // dynamics / deq / invert
  std::size_t steps = 10;
  std::string jsonl;
  double tol = 1e-10;
  std::size_t max_iter = 1000;
  std::size_t inits = 2;

  // lemmas
  bool ratio = false;
  bool product = false;
  bool local_lip = false;
  std::size_t nmax = 1000;
  std::size_t grid = 2048;
  std::size_t restarts = 2;
  std::size_t samples = 100000;
};

// Every field, in one place, so the JSON schema and the report agree.
#define LIPATTN_RUNCONFIG_FIELDS(X)                                                              \
  X(command) X(inputs) X(out) X(seed) X(potential) X(lookup) X(heads) X(ffn) X(dim) X(box_lo) X(box_hi)          \
  X(unbounded) X(query) X(instances) X(max_dim) X(max_n) X(max_heads) X(sabotage) X(metric)      \
  X(plan) X(theorem) X(component) X(n) X(m) X(trials) X(n_min) X(n_max) X(radius)                \
  X(perturbation) X(jitter) X(csv) X(steps) X(jsonl) X(tol) X(max_iter) X(inits) X(ratio)        \
  X(product) X(local_lip) X(nmax) X(grid) X(restarts) X(samples)

inline json to_json(const RunConfig& c) {
  json j;
#define X(f) j[#f] = c.f;
  LIPATTN_RUNCONFIG_FIELDS(X)
#undef X
  return j;
}

/// Applies a JSON object on top of `c`. Unknown keys and type errors throw.
inline void apply_json(RunConfig& c, const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    try {
#define X(f)                              \
  if (key == #f) {                        \
    c.f = value.get<decltype(c.f)>();     \
    known = true;                         \
  }
      LIPATTN_RUNCONFIG_FIELDS(X)
#undef X
    } catch (const json::exception& e) {
      throw ConfigError("config field '" + key + "': " + e.what());
    }
    if (!known) throw ConfigError("unknown config field '" + key + "'");
  }
}

/// FNV-1a over the canonical (key-sorted) JSON dump.
inline std::string config_hash(const RunConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream s;
  s << std::hex << h;
  return s.str();
}

// ---------------------------------------------------------------------------
// Potential / lookup specs

namespace detail {

inline void only_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " spec must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(std::string("unknown field '") + key + "' in " + what + " spec");
  }
}

inline Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw ConfigError(std::string(what) + " must be a non-empty matrix");
  std::vector<Vec> rows;
  for (const auto& r : j) rows.push_back(r.get<Vec>());
  try {
    return Matrix::from_rows(rows);
  } catch (const Error& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

}  // namespace detail

/// Short flag forms: "gaussian", "constant", "dot", "dot:<scale>".
inline json parse_potential_flag(const std::string& s) {
  if (s == "gaussian" || s == "constant") return {{"kind", s}};
  if (s == "dot") return {{"kind", "dot_product"}};
  if (s.rfind("dot:", 0) == 0) return {{"kind", "dot_product"}, {"scale", std::stod(s.substr(4))}};
  if (!s.empty() && s.front() == '{') return json::parse(s);
  throw ConfigError("unknown potential '" + s + "'");
}

/// Short flag forms: "identity", "scale:<alpha>".
inline json parse_lookup_flag(const std::string& s) {
  if (s == "identity") return {{"kind", "identity"}};
  if (s.rfind("scale:", 0) == 0) return {{"kind", "scaled_identity"}, {"alpha", std::stod(s.substr(6))}};
  if (!s.empty() && s.front() == '{') return json::parse(s);
  throw ConfigError("unknown lookup '" + s + "'");
}

inline Potential make_potential(const json& j, std::size_t dim) {
  const std::string kind = j.value("kind", "");
  try {
    if (kind == "gaussian") {
      detail::only_keys(j, {"kind"}, "potential");
      return Potential::gaussian(dim);
    }
    if (kind == "constant") {
      detail::only_keys(j, {"kind"}, "potential");
      return Potential::constant(dim);
    }
    if (kind == "dot_product") {
      detail::only_keys(j, {"kind", "scale"}, "potential");
      return Potential::dot_product(dim, j.value("scale", 1.0 / std::sqrt(static_cast<double>(dim))));
    }
    if (kind == "scaled_dot_product") {
      detail::only_keys(j, {"kind", "W_Q", "W_K", "scale"}, "potential");
      Matrix wq = detail::matrix_from_json(j.at("W_Q"), "W_Q");
      Matrix wk = detail::matrix_from_json(j.at("W_K"), "W_K");
      if (wq.cols() != dim || wk.cols() != dim || wq.rows() != wk.rows())
        throw ConfigError("W_Q and W_K must both be k x " + std::to_string(dim));
      const double scale = j.value("scale", 1.0 / std::sqrt(static_cast<double>(wq.rows())));
      return Potential::scaled_dot_product(std::move(wq), std::move(wk), scale);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("potential spec: ") + e.what());
  }
  throw ConfigError("unknown potential kind '" + kind + "'");
}

inline Lookup make_lookup(const json& j, std::size_t dim) {
  const std::string kind = j.value("kind", "");
  try {
    if (kind == "identity") {
      detail::only_keys(j, {"kind"}, "lookup");
      return Lookup::identity();
    }
    if (kind == "scaled_identity") {
      detail::only_keys(j, {"kind", "alpha"}, "lookup");
      return Lookup::linear(Matrix::identity(dim, j.at("alpha").get<double>()));
    }
    if (kind == "linear") {
      detail::only_keys(j, {"kind", "W_V"}, "lookup");
      Matrix w = detail::matrix_from_json(j.at("W_V"), "W_V");
      if (w.cols() != dim) throw ConfigError("W_V must have " + std::to_string(dim) + " columns");
      return Lookup::linear(std::move(w));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("lookup spec: ") + e.what());
  }
  throw ConfigError("unknown lookup kind '" + kind + "'");
}

inline AttentionConfig make_attention(const json& potential, const json& lookup, std::size_t dim) {
  try {
    return AttentionConfig(make_potential(potential, dim), make_lookup(lookup, dim));
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

inline AttentionConfig make_attention(const RunConfig& c) {
  return make_attention(c.potential, c.lookup, c.dim);
}

/// Multi-head layer from `heads`; an empty list means one head built from
/// potential/lookup with W_O = I.
inline MultiHeadConfig make_multi_head(const RunConfig& c) {
  std::vector<Head> hs;
  try {
    if (c.heads.empty()) {
      hs.push_back({make_attention(c), Matrix::identity(c.dim)});
    } else {
      for (const auto& h : c.heads) {
        detail::only_keys(h, {"potential", "lookup", "W_O"}, "head");
        AttentionConfig a = make_attention(h.value("potential", c.potential),
                                           h.value("lookup", c.lookup), c.dim);
        Matrix wo = h.contains("W_O") ? detail::matrix_from_json(h.at("W_O"), "W_O")
                                      : Matrix::identity(a.value_dim());
        hs.push_back({std::move(a), std::move(wo)});
      }
    }
    return MultiHeadConfig(std::move(hs));
  } catch (const Error& e) {
    throw ConfigError(std::string("heads: ") + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("heads: ") + e.what());
  }
}

inline FfnConfig make_ffn(const RunConfig& c) {
  std::vector<FfnLayer> layers;
  try {
    for (const auto& l : c.ffn) {
      detail::only_keys(l, {"W", "b", "activation"}, "ffn layer");
      FfnLayer layer{detail::matrix_from_json(l.at("W"), "W"), l.at("b").get<Vec>(),
                     Activation::Identity};
      const std::string act = l.value("activation", "identity");
      if (act == "relu") layer.activation = Activation::Relu;
      else if (act == "tanh") layer.activation = Activation::Tanh;
      else if (act != "identity") throw ConfigError("unknown activation '" + act + "'");
      layers.push_back(std::move(layer));
    }
    return FfnConfig(std::move(layers));
  } catch (const Error& e) {
    throw ConfigError(std::string("ffn: ") + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("ffn: ") + e.what());
  }
}

inline DomainBox make_domain(const RunConfig& c) {
  if (c.unbounded) return DomainBox::unbounded(c.dim);
  if (!(c.box_lo < c.box_hi)) throw ConfigError("box_lo must be < box_hi");
  return DomainBox::cube(c.dim, c.box_lo, c.box_hi);
}

// ---------------------------------------------------------------------------
// Point clouds: CSV (one point per row, '#' comments, optional header row)
// or JSON (array of rows, or {"points": [...]}).

inline PointCloud read_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  const bool is_json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  if (is_json) {
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("'" + path + "': " + e.what());
    }
    if (j.is_object()) {
      for (const auto& [key, value] : j.items())
        if (key != "points") throw ConfigError("unknown field '" + key + "' in '" + path + "'");
      j = j.at("points");
    }
    std::vector<Vec> rows;
    for (const auto& r : j) rows.push_back(r.get<Vec>());
    if (rows.empty()) throw ConfigError("'" + path + "' has no points");
    return PointCloud::from_rows(rows);
  }
  std::vector<Vec> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Vec row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (rows.empty() && lineno == 1) continue;  // header
      throw ConfigError("'" + path + "' line " + std::to_string(lineno) + ": not numeric");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("'" + path + "' has no points");
  try {
    return PointCloud::from_rows(rows);
  } catch (const Error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

inline json cloud_json(const PointCloud& pc) { return pc.rows(); }

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

}  // namespace lipattn::cli
