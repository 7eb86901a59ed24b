#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "scmech/bundle.hpp"
#include "scmech/domain.hpp"
#include "scmech/error.hpp"
#include "scmech/measure.hpp"
#include "scmech/mechanism.hpp"
#include "scmech/verify.hpp"

namespace scmech {

using json = nlohmann::json;

namespace detail {

inline const json& require_key(const json& j, const char* key, const char* what) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(Errc::schema, std::string(what) + " is missing \"" + key + "\"");
  }
  return j.at(key);
}

inline double require_number(const json& j, const char* key, const char* what) {
  const json& v = require_key(j, key, what);
  if (!v.is_number()) throw Error(Errc::schema, std::string(what) + ": \"" + key + "\" must be a number");
  return v.get<double>();
}

}  // namespace detail

// ---- domain -------------------------------------------------------------

inline json to_json(const Domain& d) {
  json params = json::object();
  const auto& iv = d.interval();
  params["lo"] = iv.lo;
  if (std::isfinite(iv.hi)) params["hi"] = iv.hi;
  params["lo_open"] = iv.lo_open;
  params["hi_open"] = iv.hi_open;
  if (d.family() == Family::power_spliced) params["q_star"] = d.q_star();
  return json{{"family", d.name()}, {"kind", to_string(d.kind())}, {"params", params}};
}

inline Domain domain_from_json(const json& j) {
  if (j.is_string()) return Domain(family_from_string(j.get<std::string>()));
  const json& fam = detail::require_key(j, "family", "domain");
  if (!fam.is_string()) throw Error(Errc::schema, "domain: \"family\" must be a string");
  Family f = family_from_string(fam.get<std::string>());
  ParamInterval iv = Domain::default_interval(f);
  double q_star = Domain::kDefaultQStar;
  if (j.contains("params")) {
    const json& p = j.at("params");
    if (!p.is_object()) throw Error(Errc::schema, "domain: \"params\" must be an object");
    if (p.contains("lo")) iv.lo = detail::require_number(p, "lo", "domain params");
    if (p.contains("hi")) iv.hi = detail::require_number(p, "hi", "domain params");
    if (p.contains("lo_open")) iv.lo_open = p.at("lo_open").get<bool>();
    if (p.contains("hi_open")) iv.hi_open = p.at("hi_open").get<bool>();
    if (p.contains("q_star")) q_star = detail::require_number(p, "q_star", "domain params");
  }
  Domain d(f, iv, q_star);
  if (j.contains("kind") && j.at("kind") != to_string(d.kind())) {
    throw Error(Errc::schema, "domain: kind does not match family " + d.name());
  }
  return d;
}

// ---- distribution -------------------------------------------------------

inline json to_json(const TypeDistribution& dist) {
  return std::visit(
      [](const auto& s) -> json {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Uniform>) {
          return {{"name", "uniform"}, {"params", {{"a", s.a}, {"b", s.b}}}};
        } else if constexpr (std::is_same_v<S, TruncatedExponential>) {
          return {{"name", "truncated_exponential"},
                  {"params", {{"rate", s.rate}, {"a", s.a}, {"b", s.b}}}};
        } else if constexpr (std::is_same_v<S, BetaDist>) {
          return {{"name", "beta"}, {"params", {{"alpha", s.alpha}, {"beta", s.beta}}}};
        } else {
          json table = json::array();
          for (const auto& [x, c] : s.knots) table.push_back({x, c});
          return {{"table", table}};
        }
      },
      dist.spec());
}

inline TypeDistribution distribution_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::schema, "distribution must be an object");
  if (j.contains("table")) {
    std::vector<std::pair<double, double>> knots;
    for (const auto& row : j.at("table")) {
      if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number()) {
        throw Error(Errc::schema, "distribution table rows must be [theta, cdf]");
      }
      knots.emplace_back(row[0].get<double>(), row[1].get<double>());
    }
    return TypeDistribution::tabulated(std::move(knots));
  }
  const json& name = detail::require_key(j, "name", "distribution");
  const json params = j.value("params", json::object());
  std::string n = name.get<std::string>();
  if (n == "uniform") {
    return TypeDistribution::uniform(detail::require_number(params, "a", "uniform"),
                                     detail::require_number(params, "b", "uniform"));
  }
  if (n == "truncated_exponential") {
    return TypeDistribution::truncated_exponential(
        detail::require_number(params, "rate", "truncated_exponential"),
        detail::require_number(params, "a", "truncated_exponential"),
        detail::require_number(params, "b", "truncated_exponential"));
  }
  if (n == "beta") {
    return TypeDistribution::beta(detail::require_number(params, "alpha", "beta"),
                                  detail::require_number(params, "beta", "beta"));
  }
  throw Error(Errc::schema, "unknown distribution '" + n + "'");
}

// ---- mechanisms ---------------------------------------------------------

inline json to_json(const FiniteMechanism<Domain>& m) {
  json bundles = json::array();
  for (const auto& z : m.bundles()) bundles.push_back({z.t, z.q});
  return json{{"domain", to_json(m.domain())}, {"bundles", bundles}, {"breakpoints", m.breakpoints()}};
}

inline std::vector<Bundle> bundles_from_json(const json& arr) {
  if (!arr.is_array()) throw Error(Errc::schema, "\"bundles\" must be an array");
  std::vector<Bundle> out;
  for (const auto& row : arr) {
    if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number()) {
      throw Error(Errc::schema, "bundles must be [t, q] pairs");
    }
    out.push_back(Bundle{row[0].get<double>(), row[1].get<double>()});
  }
  return out;
}

/// Stored mechanism. Breakpoints are recomputed when absent.
inline FiniteMechanism<Domain> mechanism_from_json(const json& j) {
  Domain d = domain_from_json(detail::require_key(j, "domain", "mechanism"));
  auto bundles = bundles_from_json(detail::require_key(j, "bundles", "mechanism"));
  if (!j.contains("breakpoints")) return FiniteMechanism<Domain>::from_range(d, std::move(bundles));
  std::vector<double> bps;
  for (const auto& v : j.at("breakpoints")) {
    if (!v.is_number()) throw Error(Errc::schema, "breakpoints must be numbers");
    bps.push_back(v.get<double>());
  }
  return FiniteMechanism<Domain>::from_parts(d, std::move(bundles), std::move(bps));
}

/// Continuum rule r -> (a_t r + b_t, a_q r + b_q) on a closed interval.
struct AffineRule {
  Domain domain;
  double t_slope, t_intercept, q_slope, q_intercept;
  double lo, hi;

  Bundle operator()(double r) const {
    return Bundle{t_slope * r + t_intercept, q_slope * r + q_intercept};
  }
};

inline json to_json(const AffineRule& a) {
  return json{{"domain", to_json(a.domain)},
              {"affine", {{"t", {a.t_slope, a.t_intercept}}, {"q", {a.q_slope, a.q_intercept}}}},
              {"interval", {a.lo, a.hi}}};
}

inline AffineRule affine_from_json(const json& j) {
  Domain d = domain_from_json(detail::require_key(j, "domain", "mechanism"));
  const json& a = detail::require_key(j, "affine", "mechanism");
  const json& t = detail::require_key(a, "t", "affine");
  const json& q = detail::require_key(a, "q", "affine");
  const json& iv = detail::require_key(j, "interval", "mechanism");
  auto pair = [](const json& v, const char* what) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw Error(Errc::schema, std::string(what) + " must be a pair of numbers");
    }
    return std::pair<double, double>{v[0].get<double>(), v[1].get<double>()};
  };
  auto [ts, ti] = pair(t, "affine t");
  auto [qs, qi] = pair(q, "affine q");
  auto [lo, hi] = pair(iv, "interval");
  if (!(lo < hi)) throw Error(Errc::schema, "interval must satisfy lo < hi");
  if (!d.interval().contains(lo) || !d.interval().contains(hi)) {
    throw Error(Errc::param_out_of_interval, "affine interval outside the domain parameter interval");
  }
  AffineRule rule{d, ts, ti, qs, qi, lo, hi};
  for (double r : {lo, hi}) {
    if (!is_valid(rule(r))) throw Error(Errc::inadmissible_bundle, "affine rule leaves [0,inf)x[0,1]");
  }
  return rule;
}

using MechanismFile = std::variant<FiniteMechanism<Domain>, AffineRule>;

inline MechanismFile mechanism_file_from_json(const json& j) {
  if (j.is_object() && j.contains("affine")) return affine_from_json(j);
  return mechanism_from_json(j);
}

// ---- reports ------------------------------------------------------------

inline json to_json(const Violation& v) {
  json out{{"kind", to_string(v.kind)}, {"truthful_r", v.truthful_r}, {"gain", v.gain}};
  out["deviant_r"] = v.deviant_r ? json(*v.deviant_r) : json(nullptr);
  return out;
}

inline json to_json(const VerificationReport& r) {
  json items = json::array();
  for (const auto& v : r.violations) items.push_back(to_json(v));
  return json{{"violations", items}, {"grid_size", r.grid_size}, {"tolerance", r.tolerance},
              {"pass", r.pass()}};
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// One row per violation: kind,truthful_r,deviant_r,gain.
inline std::string to_csv(const std::vector<const VerificationReport*>& reports) {
  std::ostringstream os;
  os << "kind,truthful_r,deviant_r,gain\n";
  for (const auto* r : reports) {
    for (const auto& v : r->violations) {
      os << to_string(v.kind) << ',' << format_double(v.truthful_r) << ','
         << (v.deviant_r ? format_double(*v.deviant_r) : std::string()) << ','
         << format_double(v.gain) << '\n';
    }
  }
  return os.str();
}

inline json to_json(const CrossingReport& r) {
  json items = json::array();
  for (const auto& w : r.witnesses) {
    items.push_back({{"type", w.type == CrossingWitness::Type::tangency ? "tangency" : "multiple_crossing"},
                     {"r_low", w.r_low},
                     {"r_high", w.r_high},
                     {"anchor", {w.anchor.t, w.anchor.q}},
                     {"q", w.q}});
  }
  return json{{"witnesses", items}, {"pass", r.pass()}};
}

// ---- files --------------------------------------------------------------

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::schema, "'" + path + "' is not valid JSON: " + e.what());
  }
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(Errc::io, "write to '" + path + "' failed");
}

}  // namespace scmech
