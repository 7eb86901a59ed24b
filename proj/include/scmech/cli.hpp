#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scmech/countable.hpp"
#include "scmech/domain.hpp"
#include "scmech/io.hpp"
#include "scmech/measure.hpp"
#include "scmech/multibuyer.hpp"
#include "scmech/optimize.hpp"
#include "scmech/revenue.hpp"
#include "scmech/verify.hpp"

namespace scmech::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kVerificationFailed = 2 };

struct Args {
  json domain = "quasilinear";
  json dist = "uniform:0,1";
  std::size_t max_bundles = 4;
  std::size_t restarts = 16;
  std::size_t grid = 500;
  std::size_t samples = 1000000;
  std::size_t n = 2;
  std::uint64_t seed = 1;
  double eps = 0.05;
  std::optional<double> reserve;
  std::string revenue_mode = "payment";
  std::string out;
  std::string csv;
  std::string mech;
  std::string range;
  std::string line = "3,0.083333333333333329,0.33333333333333331";
  std::string sequence = "harmonic:0.66666666666666663,3";
  std::string upper_sequence;
  std::string t_grid = "0,1,11";
  std::string q_grid = "0,1,17";
  std::string r_grid;
  unsigned threads = 0;
  bool dist_given = false;
  bool domain_given = false;
};

namespace detail {

inline std::vector<double> numbers(const std::string& text, std::size_t expected, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(Errc::schema, std::string(what) + ": '" + item + "' is not a number");
    }
  }
  if (expected && out.size() != expected) {
    throw Error(Errc::schema, std::string(what) + " expects " + std::to_string(expected) + " numbers");
  }
  return out;
}

inline Domain resolve_domain(const json& spec) {
  if (spec.is_string()) {
    std::string s = spec.get<std::string>();
    try {
      return Domain(family_from_string(s));
    } catch (const Error&) {
      std::ifstream probe(s);
      if (!probe) throw;
      return domain_from_json(read_json_file(s));
    }
  }
  return domain_from_json(spec);
}

inline TypeDistribution resolve_distribution(const json& spec) {
  if (!spec.is_string()) return distribution_from_json(spec);
  std::string s = spec.get<std::string>();
  auto colon = s.find(':');
  if (colon != std::string::npos) {
    std::string name = s.substr(0, colon);
    std::string rest = s.substr(colon + 1);
    if (name == "uniform") {
      auto v = numbers(rest, 2, "uniform");
      return TypeDistribution::uniform(v[0], v[1]);
    }
    if (name == "beta") {
      auto v = numbers(rest, 2, "beta");
      return TypeDistribution::beta(v[0], v[1]);
    }
    if (name == "truncexp") {
      auto v = numbers(rest, 3, "truncexp");
      return TypeDistribution::truncated_exponential(v[0], v[1], v[2]);
    }
  }
  return distribution_from_json(read_json_file(s));
}

inline ParamSequence resolve_sequence(const std::string& spec, bool increasing) {
  auto colon = spec.find(':');
  std::string name = spec.substr(0, colon);
  std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  double sign = increasing ? -1.0 : 1.0;
  if (name == "harmonic") {
    auto v = numbers(rest, 2, "harmonic sequence");
    double lim = v[0], off = v[1];
    if (!(off > 0.0)) throw Error(Errc::schema, "harmonic offset must be positive");
    return {[=](std::size_t n) { return lim + sign / (static_cast<double>(n) + off); }, lim};
  }
  if (name == "geometric") {
    auto v = numbers(rest, 3, "geometric sequence");
    double lim = v[0], gap = v[1], ratio = v[2];
    return {[=](std::size_t n) { return lim + sign * gap * std::pow(ratio, static_cast<double>(n)); }, lim};
  }
  throw Error(Errc::schema, "unknown sequence '" + name + "' (use harmonic or geometric)");
}

inline std::string key_name(std::string k) {
  for (auto& c : k) {
    if (c == '-') c = '_';
  }
  return k;
}

// Values from a --config file override command-line flags.
inline void apply_config(const json& cfg, Args& a) {
  if (!cfg.is_object()) throw Error(Errc::schema, "config must be a JSON object");
  auto str = [](const json& v, const std::string& k) {
    if (!v.is_string()) throw Error(Errc::schema, "config \"" + k + "\" must be a string");
    return v.get<std::string>();
  };
  auto count = [](const json& v, const std::string& k) {
    if (!v.is_number_unsigned()) throw Error(Errc::schema, "config \"" + k + "\" must be a nonnegative integer");
    return v.get<std::uint64_t>();
  };
  auto num = [](const json& v, const std::string& k) {
    if (!v.is_number()) throw Error(Errc::schema, "config \"" + k + "\" must be a number");
    return v.get<double>();
  };
  for (const auto& [raw, v] : cfg.items()) {
    std::string k = key_name(raw);
    if (k == "domain") { a.domain = v; a.domain_given = true; }
    else if (k == "dist") { a.dist = v; a.dist_given = true; }
    else if (k == "max_bundles") a.max_bundles = count(v, k);
    else if (k == "restarts") a.restarts = count(v, k);
    else if (k == "grid") a.grid = count(v, k);
    else if (k == "samples") a.samples = count(v, k);
    else if (k == "n") a.n = count(v, k);
    else if (k == "seed") a.seed = count(v, k);
    else if (k == "threads") a.threads = static_cast<unsigned>(count(v, k));
    else if (k == "eps") a.eps = num(v, k);
    else if (k == "reserve") a.reserve = num(v, k);
    else if (k == "revenue_mode") a.revenue_mode = str(v, k);
    else if (k == "out") a.out = str(v, k);
    else if (k == "csv") a.csv = str(v, k);
    else if (k == "mech") a.mech = str(v, k);
    else if (k == "range") a.range = str(v, k);
    else if (k == "line") a.line = str(v, k);
    else if (k == "sequence") a.sequence = str(v, k);
    else if (k == "upper_sequence") a.upper_sequence = str(v, k);
    else if (k == "t_grid") a.t_grid = str(v, k);
    else if (k == "q_grid") a.q_grid = str(v, k);
    else if (k == "r_grid") a.r_grid = str(v, k);
    else throw Error(Errc::schema, "unknown config key \"" + raw + "\"");
  }
}

inline std::vector<double> grid_from_spec(const std::string& spec, const char* what) {
  auto v = numbers(spec, 3, what);
  if (!(v[2] >= 1.0) || v[2] != std::floor(v[2])) throw Error(Errc::schema, std::string(what) + " count must be a positive integer");
  return linear_grid(v[0], v[1], static_cast<std::size_t>(v[2]));
}

inline void emit(std::ostream& out, const std::string& path, const json& j) {
  if (path.empty()) out << dump(j);
  else write_text_file(path, dump(j));
}

// Parameter span used when neither --range nor --dist fixes the grid.
inline std::pair<double, double> default_span(const FiniteMechanism<Domain>& m) {
  const auto& iv = m.domain().interval();
  double lo = iv.lo_open ? iv.lo + 1e-9 : iv.lo;
  double hi;
  if (std::isfinite(iv.hi)) {
    hi = iv.hi_open ? iv.hi - 1e-9 * std::max(1.0, std::abs(iv.hi)) : iv.hi;
  } else {
    double top = m.breakpoints().empty() ? lo : m.breakpoints().back();
    hi = std::max(lo + 1.0, top + std::max(1.0, 0.5 * std::abs(top)));
  }
  return {lo, hi};
}

// ---- subcommands --------------------------------------------------------

inline int cmd_optimize(const Args& a, std::ostream& out) {
  Domain d = resolve_domain(a.domain);
  TypeDistribution dist = resolve_distribution(a.dist);
  OptimizeOptions o;
  o.max_bundles = a.max_bundles;
  o.restarts = a.restarts;
  o.seed = a.seed;
  o.threads = a.threads;
  o.mode = revenue_mode_from_string(a.revenue_mode);
  auto sol = solve_finite(d, dist, o);
  json summary{{"revenue", sol.revenue},
               {"active_bundles", sol.active_bundles},
               {"restarts_used", sol.diagnostics.restarts_used},
               {"restart_scores", sol.diagnostics.restart_scores},
               {"hazard_monotone", sol.diagnostics.hazard_monotone},
               {"revenue_mode", to_string(o.mode)},
               {"distribution", to_json(dist)}};
  json doc = to_json(sol.mechanism);
  doc["summary"] = summary;
  if (!a.out.empty()) write_text_file(a.out, dump(doc));
  out << dump(summary);
  return kOk;
}

inline int cmd_verify(const Args& a, std::ostream& out) {
  if (a.mech.empty()) throw Error(Errc::schema, "verify requires --mech");
  MechanismFile file = mechanism_file_from_json(read_json_file(a.mech));
  std::optional<std::pair<double, double>> span;
  if (!a.range.empty()) {
    auto v = numbers(a.range, 2, "range");
    span = std::pair{v[0], v[1]};
  } else if (a.dist_given) {
    auto dist = resolve_distribution(a.dist);
    span = std::pair{dist.lower(), dist.upper()};
  }
  if (a.grid < 2) throw Error(Errc::schema, "grid needs at least 2 points");
  VerificationReport ic, ir, shape;
  if (auto* fm = std::get_if<FiniteMechanism<Domain>>(&file)) {
    auto [lo, hi] = span.value_or(default_span(*fm));
    auto grid = refine_with_breakpoints(linear_grid(lo, hi, a.grid), fm->breakpoints());
    ic = check_strategy_proof(fm->domain(), *fm, grid, kIcTol, a.threads);
    ir = check_individual_rationality(fm->domain(), *fm, grid);
    shape = check_shape(*fm, grid);
  } else {
    const auto& rule = std::get<AffineRule>(file);
    auto [lo, hi] = span.value_or(std::pair{rule.lo, rule.hi});
    if (lo < rule.lo || hi > rule.hi) throw Error(Errc::param_out_of_interval, "range exceeds the rule's interval");
    auto grid = linear_grid(lo, hi, a.grid);
    ic = check_strategy_proof(rule.domain, rule, grid, kIcTol, a.threads);
    ir = check_individual_rationality(rule.domain, rule, grid);
    shape.grid_size = grid.size();
    shape.tolerance = kIndifferenceTol;
  }
  bool pass = ic.pass() && ir.pass() && shape.pass();
  json report{{"ic", to_json(ic)}, {"ir", to_json(ir)}, {"shape", to_json(shape)}, {"pass", pass}};
  emit(out, a.out, report);
  if (!a.csv.empty()) write_text_file(a.csv, to_csv({&ic, &ir, &shape}));
  if (!a.out.empty()) out << dump(json{{"pass", pass}, {"violations", ic.violations.size() + ir.violations.size() + shape.violations.size()}});
  return pass ? kOk : kVerificationFailed;
}

inline int cmd_revenue(const Args& a, std::ostream& out) {
  if (a.mech.empty()) throw Error(Errc::schema, "revenue requires --mech");
  MechanismFile file = mechanism_file_from_json(read_json_file(a.mech));
  TypeDistribution dist = resolve_distribution(a.dist);
  RevenueMode mode = revenue_mode_from_string(a.revenue_mode);
  double rev, bound;
  if (auto* fm = std::get_if<FiniteMechanism<Domain>>(&file)) {
    rev = expected_revenue(*fm, dist, mode);
    bound = revenue_upper_bound(fm->domain(), dist);
  } else {
    const auto& rule = std::get<AffineRule>(file);
    if (dist.lower() < rule.lo || dist.upper() > rule.hi) {
      throw Error(Errc::invalid_argument, "distribution support is not inside the rule's interval");
    }
    rev = expected_revenue(std::function<Bundle(double)>(rule), dist, mode);
    bound = revenue_upper_bound(rule.domain, dist);
  }
  json result{{"revenue", rev}, {"upper_bound", bound}, {"revenue_mode", to_string(mode)}};
  emit(out, a.out, result);
  if (!a.out.empty()) out << dump(result);
  return kOk;
}

inline int cmd_truncate(const Args& a, std::ostream& out) {
  Domain d = a.domain_given ? resolve_domain(a.domain) : Domain(Family::sqrt_quasilinear);
  TypeDistribution dist = a.dist_given ? resolve_distribution(a.dist) : TypeDistribution::uniform(1.0 / 3.0, 1.0);
  auto l = numbers(a.line, 3, "line");
  std::optional<ParamSequence> up;
  std::optional<ParamSequence> lowseq;
  if (!a.sequence.empty()) lowseq = resolve_sequence(a.sequence, true);
  if (!a.upper_sequence.empty()) up = resolve_sequence(a.upper_sequence, false);
  auto cm = countable_geometric(d, AnchorLine{l[0], l[1], l[2]}, lowseq, up);
  RevenueMode mode = revenue_mode_from_string(a.revenue_mode);
  auto res = epsilon_truncate(cm, a.eps, dist, mode);
  auto rep = verify_all(res.mechanism, support_grid(dist, 200), a.threads);
  json summary{{"eps", a.eps},
               {"countable_revenue", res.countable_revenue},
               {"truncated_revenue", res.truncated_revenue},
               {"gap", res.gap},
               {"tail_bound", res.tail_bound},
               {"lower_cut", res.lower_cut},
               {"upper_cut", res.upper_cut},
               {"dominates", res.dominates},
               {"bundles", res.mechanism.size()},
               {"verified", rep.pass()}};
  json doc = to_json(res.mechanism);
  doc["summary"] = summary;
  if (!a.out.empty()) write_text_file(a.out, dump(doc));
  out << dump(summary);
  return rep.pass() ? kOk : kVerificationFailed;
}

inline int cmd_multibuyer(const Args& a, std::ostream& out) {
  TypeDistribution dist = resolve_distribution(a.dist);
  double reserve = a.reserve ? *a.reserve : inverse_virtual(dist).theta;
  MultiBuyerMechanism m{a.n, reserve, dist};
  auto sim = simulate_revenue(m, a.samples, a.seed, a.threads);
  json summary{{"n", a.n}, {"reserve", reserve}, {"estimate", sim.estimate},
               {"stderr", sim.std_error}, {"samples", sim.samples}, {"seed", sim.seed}};
  emit(out, a.out, summary);
  if (!a.out.empty()) out << dump(summary);
  return kOk;
}

inline int cmd_validate_domain(const Args& a, std::ostream& out) {
  Domain d = resolve_domain(a.domain);
  auto ts = grid_from_spec(a.t_grid, "t-grid");
  auto qs = grid_from_spec(a.q_grid, "q-grid");
  std::vector<double> rs;
  if (!a.r_grid.empty()) {
    rs = grid_from_spec(a.r_grid, "r-grid");
  } else {
    const auto& iv = d.interval();
    double lo = iv.lo_open || iv.lo == 0.0 ? iv.lo + 1e-3 : iv.lo;
    double hi = std::isfinite(iv.hi) ? (iv.hi_open ? iv.hi - 1e-3 : iv.hi) : lo + 4.0;
    rs = linear_grid(lo, hi, 9);
  }
  for (double r : rs) {
    if (!d.interval().contains(r)) throw Error(Errc::param_out_of_interval, "r-grid leaves the parameter interval");
  }
  std::vector<Bundle> bundles;
  for (double q : qs) {
    for (double t : ts) bundles.push_back(Bundle{t, q});
  }
  auto rep = validate_single_crossing(d, bundles, rs);
  emit(out, a.out, to_json(rep));
  if (!a.out.empty()) out << dump(json{{"pass", rep.pass()}, {"witnesses", rep.witnesses.size()}});
  return rep.pass() ? kOk : kVerificationFailed;
}

inline void error_record(std::ostream& err, const std::string& kind, const std::string& message) {
  err << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

}  // namespace detail

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Strategy-proof mechanisms on single-crossing preference domains"};
  app.require_subcommand(1);
  Args a;
  std::string domain_flag, dist_flag, config;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON file whose keys override flags");
    sub->add_option("--threads", a.threads, "worker cap (also SC_MECH_THREADS)");
  };
  auto with_domain = [&](CLI::App* sub) {
    sub->add_option("--domain", domain_flag, "family name or domain JSON file");
  };
  auto with_dist = [&](CLI::App* sub) {
    sub->add_option("--dist", dist_flag, "uniform:a,b | beta:a,b | truncexp:rate,a,b | JSON file");
  };
  auto with_mode = [&](CLI::App* sub) {
    sub->add_option("--revenue-mode", a.revenue_mode, "payment | expected-payment");
  };

  auto* opt = app.add_subcommand("optimize", "solve the finite-range revenue program");
  common(opt);
  with_domain(opt);
  with_dist(opt);
  with_mode(opt);
  opt->add_option("--max-bundles", a.max_bundles, "largest range size");
  opt->add_option("--restarts", a.restarts, "local-search restarts");
  opt->add_option("--seed", a.seed, "random seed");
  opt->add_option("--out", a.out, "mechanism JSON output");

  auto* ver = app.add_subcommand("verify", "grid-check a stored mechanism");
  common(ver);
  with_dist(ver);
  ver->add_option("--mech", a.mech, "mechanism JSON file");
  ver->add_option("--grid", a.grid, "grid points");
  ver->add_option("--range", a.range, "lo,hi parameter span");
  ver->add_option("--out", a.out, "report JSON output");
  ver->add_option("--csv", a.csv, "report CSV output");

  auto* rev = app.add_subcommand("revenue", "expected revenue of a stored mechanism");
  common(rev);
  with_dist(rev);
  with_mode(rev);
  rev->add_option("--mech", a.mech, "mechanism JSON file");
  rev->add_option("--out", a.out, "result JSON output");

  auto* tr = app.add_subcommand("truncate", "finite truncation of a countable mechanism");
  common(tr);
  with_domain(tr);
  with_dist(tr);
  with_mode(tr);
  tr->add_option("--eps", a.eps, "revenue tolerance");
  tr->add_option("--line", a.line, "slope,t_lo,t_hi of the anchor line");
  tr->add_option("--sequence", a.sequence, "increasing tail: harmonic:limit,offset | geometric:limit,gap,ratio");
  tr->add_option("--upper-sequence", a.upper_sequence, "decreasing tail, same forms");
  tr->add_option("--out", a.out, "mechanism JSON output");

  auto* mb = app.add_subcommand("multibuyer", "Monte Carlo revenue of the n-buyer extension");
  common(mb);
  with_dist(mb);
  mb->add_option("--n", a.n, "number of buyers");
  mb->add_option("--reserve", a.reserve, "reserve price (default: root of the virtual valuation)");
  mb->add_option("--samples", a.samples, "number of sampled profiles");
  mb->add_option("--seed", a.seed, "random seed");
  mb->add_option("--out", a.out, "summary JSON output");

  auto* vd = app.add_subcommand("validate-domain", "grid check of the single-crossing property");
  common(vd);
  with_domain(vd);
  vd->add_option("--t-grid", a.t_grid, "lo,hi,n payments");
  vd->add_option("--q-grid", a.q_grid, "lo,hi,n quantities");
  vd->add_option("--r-grid", a.r_grid, "lo,hi,n parameters");
  vd->add_option("--out", a.out, "report JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    detail::error_record(err, "usage", e.what());
    return kInputError;
  }

  try {
    if (!domain_flag.empty()) {
      a.domain = domain_flag;
      a.domain_given = true;
    }
    if (!dist_flag.empty()) {
      a.dist = dist_flag;
      a.dist_given = true;
    }
    if (!config.empty()) detail::apply_config(read_json_file(config), a);
    if (opt->parsed()) return detail::cmd_optimize(a, out);
    if (ver->parsed()) return detail::cmd_verify(a, out);
    if (rev->parsed()) return detail::cmd_revenue(a, out);
    if (tr->parsed()) return detail::cmd_truncate(a, out);
    if (mb->parsed()) return detail::cmd_multibuyer(a, out);
    if (vd->parsed()) return detail::cmd_validate_domain(a, out);
  } catch (const Error& e) {
    if (e.code() == Errc::verification_failed) {
      detail::error_record(err, to_string(e.code()), e.what());
      return kVerificationFailed;
    }
    detail::error_record(err, to_string(e.code()), e.what());
    return kInputError;
  } catch (const json::exception& e) {
    detail::error_record(err, "schema", e.what());
    return kInputError;
  } catch (const std::exception& e) {
    detail::error_record(err, "internal", e.what());
    return kInputError;
  }
  return kInputError;
}

}  // namespace scmech::cli
