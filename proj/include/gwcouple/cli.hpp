#pragma once

// Command-line front end. run_cli is the whole program minus main(), so tests
// can drive it with string streams.

#include "gwcouple/chain.hpp"
#include "gwcouple/coupler.hpp"
#include "gwcouple/infinite.hpp"
#include "gwcouple/parallel.hpp"
#include "gwcouple/rational.hpp"
#include "gwcouple/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace gwcouple {

namespace cli {

enum ExitCode : int { Ok = 0, TestFailure = 1, UsageError = 2 };

struct Common {
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string format = "text";
  std::string output;
};

struct SampleArgs {
  std::string p;
  std::uint32_t depth = 2;
  std::uint64_t samples = 10;
  std::uint64_t size_cap = LadderCaps{}.size_cap;
};

struct CoupleArgs {
  std::string grid;
  std::uint32_t depth = 2;
  std::uint64_t samples = 10;
  long long emit = -1;
  unsigned exact_cap = 9;
  bool exact_tiny = false;
  unsigned tiny_max_size = 4;
  bool traces = false;
  bool flags = false;
};

struct VerifyArgs {
  std::vector<std::string> suites;
  double scale = 1.0;
  double significance = 1e-3;
  unsigned exact_cap = 9;
  bool timing = false;
};

struct TransportArgs {
  unsigned k = 0;
};

struct NaiveArgs {
  std::string p1, p2;
};

inline std::vector<Rational> parse_grid(const std::string& text) {
  std::vector<Rational> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) grid.push_back(parse_rational(item));
  if (grid.empty()) throw std::invalid_argument("empty grid");
  return grid;
}

/// Counts root children whose subtree reaches the horizon through a frontier vertex.
inline std::uint32_t infinite_lines(const TruncatedTree& t) {
  const auto& deg = t.degrees();
  const auto& fr = t.frontier();
  if (deg.empty() || (deg.size() == 1 && fr[0])) return fr.empty() ? 0 : fr[0];
  const auto ends = detail::subtree_ends(deg);
  std::uint32_t lines = 0;
  for (std::uint32_t c = 0, x = 1; c < deg[0]; ++c, x = ends[x])
    if (std::find(fr.begin() + x, fr.begin() + ends[x], std::uint8_t{1}) != fr.begin() + ends[x]) ++lines;
  return lines;
}

inline std::string rate(std::uint64_t num, std::uint64_t den) {
  return std::to_string(num) + "/" + std::to_string(den) + " (" + detail::fmt(den ? static_cast<double>(num) / static_cast<double>(den) : 0.0) + ")";
}

// --- sample ----------------------------------------------------------------

inline int cmd_sample(const Common& c, const SampleArgs& a, std::ostream& out) {
  const Rational p = parse_rational(a.p);
  if (p == 1) throw std::domain_error("p = 1 is excluded: the conditioned tree has infinite root degree almost surely");
  if (p < Rational(1, 2) || p > 1) throw std::domain_error("p must lie in [1/2, 1)");
  LadderCaps caps;
  caps.size_cap = a.size_cap;
  ConditionedSampler sampler(to_double(p), caps);
  auto samples = parallel_map<InfiniteSample>(a.samples, c.threads, [&](std::uint64_t i) {
    return sampler.sample(a.depth, Rng::keyed(c.seed, {i}));
  });
  std::uint64_t compromised = 0, single = 0;
  for (const auto& s : samples) {
    if (!s.tree.status().clean()) ++compromised;
    if (infinite_lines(s.tree) == 1) ++single;
  }
  if (c.format == "json") {
    nlohmann::json arr = nlohmann::json::array();
    for (std::uint64_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      arr.push_back({{"index", i},
                     {"tree", encode(s.tree)},
                     {"infinite_lines", infinite_lines(s.tree)},
                     {"status", s.tree.status().describe()},
                     {"root", ladder_trace_json(s.root)}});
    }
    nlohmann::json j{{"command", "sample"}, {"p", to_decimal(p)}, {"depth", a.depth}, {"seed", c.seed}, {"samples", arr}};
    j["summary"] = {{"samples", samples.size()}, {"compromised", compromised}, {"single_infinite_line", single}};
    out << j.dump(2) << '\n';
  } else if (c.format == "dot") {
    for (std::uint64_t i = 0; i < samples.size(); ++i) out << to_dot(samples[i].tree, "T" + std::to_string(i));
  } else {
    out << "# sample p=" << to_decimal(p) << " depth=" << a.depth << " samples=" << a.samples << " seed=" << c.seed << '\n';
    for (std::uint64_t i = 0; i < samples.size(); ++i) {
      const auto& t = samples[i].tree;
      out << i << "\tlines=" << infinite_lines(t) << '\t' << encode(t);
      if (!t.status().clean()) out << '\t' << t.status().describe();
      out << '\n';
    }
    out << "# compromised " << rate(compromised, samples.size()) << '\n';
    out << "# exactly one infinite root line " << rate(single, samples.size()) << '\n';
  }
  return Ok;
}

// --- couple ----------------------------------------------------------------

struct CoupleSummary {
  std::uint64_t samples = 0, nested = 0, compromised = 0, root_approx = 0, repairs_changed = 0;
  std::array<std::uint64_t, kCouplingModes> modes{};
  std::vector<CountMap> shapes;

  void add(const CoupledSample& s) {
    ++samples;
    if (s.verdict.all_nested()) ++nested;
    if (s.compromised()) ++compromised;
    if (s.root_approx) ++root_approx;
    repairs_changed += s.repairs_changed;
    for (std::size_t m = 0; m < kCouplingModes; ++m) modes[m] += s.mode_counts[m];
    if (s.depth <= 2) {
      shapes.resize(s.trees.size());
      for (std::size_t j = 0; j < s.trees.size(); ++j) ++shapes[j][encode(s.trees[j])];
    }
  }
};

inline nlohmann::json couple_summary_json(const CoupleSummary& sum, const std::vector<Rational>& grid, std::uint32_t depth) {
  std::uint64_t slots = 0;
  for (auto m : sum.modes) slots += m;
  nlohmann::json modes;
  for (std::size_t m = 0; m < kCouplingModes; ++m) {
    modes[to_string(static_cast<CouplingMode>(m))] = {
        {"slots", sum.modes[m]}, {"rate", slots ? static_cast<double>(sum.modes[m]) / static_cast<double>(slots) : 0.0}};
  }
  nlohmann::json j{{"samples", sum.samples},
                   {"nested", sum.nested},
                   {"containment_rate", sum.samples ? static_cast<double>(sum.nested) / static_cast<double>(sum.samples) : 0.0},
                   {"compromised", sum.compromised},
                   {"root_repairs", sum.root_approx},
                   {"repairs_changed", sum.repairs_changed},
                   {"modes", modes}};
  if (depth <= 2 && !sum.shapes.empty()) {
    nlohmann::json fits = nlohmann::json::array();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      auto law = depth == 1 ? depth1_law(grid[i], 16) : prefix_law(grid[i], 2, 3, 0).law;
      try {
        auto r = chi_square(sum.shapes[i], to_prob_map(law));
        fits.push_back({{"p", to_decimal(grid[i])}, {"chi2", r.statistic}, {"dof", r.dof}, {"p_value", r.p_value}});
      } catch (const std::domain_error&) {
        fits.push_back({{"p", to_decimal(grid[i])}, {"chi2", nullptr}, {"note", "too few samples"}});
      }
    }
    j["marginal_fit"] = fits;
  }
  return j;
}

inline int cmd_couple(const Common& c, const CoupleArgs& a, std::ostream& out) {
  const auto grid = parse_grid(a.grid);
  CouplerConfig cc;
  cc.exact_cap = a.exact_cap;
  cc.exact_tiny = a.exact_tiny;
  cc.tiny_max_size = a.tiny_max_size;
  cc.record_traces = a.traces;
  cc.record_flags = a.flags;
  Coupler coupler(grid, cc);
  if (a.depth == 0) throw std::domain_error("depth must be >= 1");
  auto samples = parallel_map<CoupledSample>(a.samples, c.threads, [&](std::uint64_t i) {
    return coupler.sample(a.depth, c.seed, i);
  });
  CoupleSummary sum;
  for (const auto& s : samples) sum.add(s);
  const std::uint64_t emit = a.emit < 0 ? samples.size() : std::min<std::uint64_t>(samples.size(), static_cast<std::uint64_t>(a.emit));
  const auto summary = couple_summary_json(sum, grid, a.depth);

  std::string grid_text;
  for (std::size_t i = 0; i < grid.size(); ++i) grid_text += (i ? "," : "") + to_decimal(grid[i]);
  if (c.format == "json") {
    nlohmann::json arr = nlohmann::json::array();
    for (std::uint64_t i = 0; i < emit; ++i) {
      auto j = coupled_sample_json(samples[i]);
      j["index"] = i;
      arr.push_back(std::move(j));
    }
    nlohmann::json j{{"command", "couple"}, {"grid", grid_text}, {"depth", a.depth}, {"seed", c.seed},
                     {"samples", arr},      {"summary", summary}};
    out << j.dump(2) << '\n';
  } else if (c.format == "dot") {
    for (std::uint64_t i = 0; i < emit; ++i)
      for (std::size_t j = 0; j < samples[i].trees.size(); ++j)
        out << to_dot(samples[i].trees[j], "S" + std::to_string(i) + "_p" + std::to_string(j));
  } else {
    out << "# couple grid=" << grid_text << " depth=" << a.depth << " samples=" << a.samples << " seed=" << c.seed << '\n';
    for (std::uint64_t i = 0; i < emit; ++i) {
      const auto& s = samples[i];
      out << i << '\t' << (s.verdict.all_nested() ? "nested" : "NOT-NESTED");
      for (const auto& t : s.trees) out << '\t' << encode(t);
      if (s.compromised()) out << '\t' << s.trees.front().status().describe();
      for (const auto& f : s.flags) out << "\tflag " << f.slot.to_string() << ' ' << to_string(f.mode) << (f.changed ? "+" : "");
      out << '\n';
    }
    std::uint64_t slots = 0;
    for (auto m : sum.modes) slots += m;
    out << "# containment " << rate(sum.nested, sum.samples) << '\n';
    out << "# compromised " << rate(sum.compromised, sum.samples) << '\n';
    out << "# root repairs " << rate(sum.root_approx, sum.samples) << " changing repairs " << sum.repairs_changed << '\n';
    for (std::size_t m = 0; m < kCouplingModes; ++m)
      out << "# slots " << to_string(static_cast<CouplingMode>(m)) << ' ' << rate(sum.modes[m], slots) << '\n';
    if (summary.contains("marginal_fit"))
      for (const auto& f : summary["marginal_fit"]) {
        out << "# marginal fit p=" << f["p"].get<std::string>();
        if (f["chi2"].is_null())
          out << " too few samples\n";
        else
          out << " chi2=" << detail::fmt(f["chi2"].get<double>()) << " dof=" << f["dof"].get<unsigned>()
              << " p-value=" << detail::fmt(f["p_value"].get<double>()) << '\n';
      }
  }
  return sum.nested == sum.samples ? Ok : TestFailure;
}

// --- verify / transport / demo -------------------------------------------------

inline int cmd_verify(const Common& c, const VerifyArgs& a, std::ostream& out) {
  std::vector<Suite> suites;
  for (const auto& name : a.suites) {
    if (name == "all") {
      suites.assign(kAllSuites.begin(), kAllSuites.end());
      break;
    }
    auto s = parse_suite(name);
    if (!s) throw std::invalid_argument("unknown suite '" + name + "'");
    suites.push_back(*s);
  }
  if (suites.empty()) suites.assign(kAllSuites.begin(), kAllSuites.end());
  SuiteConfig cfg;
  cfg.seed = c.seed;
  cfg.threads = c.threads;
  cfg.scale = a.scale;
  cfg.significance = a.significance;
  cfg.exact_cap = a.exact_cap;
  cfg.plans = std::make_shared<const ChainPlans>(a.exact_cap);
  bool ok = true;
  nlohmann::json reports = nlohmann::json::array();
  for (auto s : suites) {
    auto rep = run_suite(s, cfg);
    ok = ok && rep.passed();
    if (c.format == "json")
      reports.push_back(rep.json(a.timing));
    else
      out << rep.text(a.timing) << std::flush;
  }
  if (c.format == "json") out << nlohmann::json{{"passed", ok}, {"reports", reports}}.dump(2) << '\n';
  else out << (ok ? "ALL PASS" : "SOME FAILED") << '\n';
  return ok ? Ok : TestFailure;
}

inline int cmd_transport(const TransportArgs& a, std::ostream& out) {
  if (a.k == 0 || a.k > ChainPlans::kEnumerationCap - 1)
    throw std::domain_error("k must lie in [1, " + std::to_string(ChainPlans::kEnumerationCap - 1) + "]");
  ChainPlans plans(a.k);
  write_plan_csv(out, plans.plan(a.k), plans.trees(a.k), plans.trees(a.k + 1));
  return Ok;
}

inline int cmd_demo_naive(const Common& c, const NaiveArgs& a, std::ostream& out) {
  const auto p1 = parse_rational(a.p1), p2 = parse_rational(a.p2);
  auto d = naive_failure_demo(p1, p2);
  const std::string verdict = d.fails ? "fails" : "holds";
  if (c.format == "json") {
    out << nlohmann::json{{"p1", to_decimal(p1)},
                          {"p2", to_decimal(p2)},
                          {"threshold", to_decimal(d.threshold)},
                          {"p1_exceeds_threshold", d.fails}}
               .dump(2)
        << '\n';
  } else {
    out << "p1 = " << to_decimal(p1) << ", p2 = " << to_decimal(p2) << ", p2 * eta_inf(p2) = 2 p2 - 1 = "
        << to_decimal(d.threshold) << '\n';
    out << to_decimal(p1) << (d.fails ? " > " : p1 == d.threshold ? " = " : " < ") << to_decimal(d.threshold) << ": "
        << (d.fails ? "after a first infinite slot the p1 sampler declares infinite slots more often than the p2 sampler,"
                      " so a shared uniform cannot keep the trees nested"
                    : "the one-step comparison does not rule out nesting")
        << '\n';
  }
  return Ok;
}

}  // namespace cli

/// Runs the command line; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  using namespace cli;
  CLI::App app{"Nested samples of Geometric Galton-Watson trees across offspring parameters", "gwcouple"};
  app.set_config("--config", "", "INI/TOML file with option defaults (flags given on the command line win)");
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub, std::vector<std::string> formats) {
    sub->add_option("--seed", common.seed, "Master seed")->capture_default_str();
    sub->add_option("--threads", common.threads, "Worker threads (0: all cores)")->capture_default_str();
    sub->add_option("--format", common.format, "Output format")->check(CLI::IsMember(formats))->capture_default_str();
    sub->add_option("--output", common.output, "Write to this file instead of stdout");
  };

  SampleArgs sample_args;
  auto* sample = app.add_subcommand("sample", "Depth-truncated prefixes of the tree conditioned to be infinite");
  sample->add_option("--p", sample_args.p, "Offspring parameter in [1/2, 1), decimal or a/b")->required();
  sample->add_option("--depth", sample_args.depth, "Depth horizon")->capture_default_str();
  sample->add_option("--samples", sample_args.samples, "Number of samples")->capture_default_str();
  sample->add_option("--size-cap", sample_args.size_cap, "Largest finite subtree size resolved by the ladder")->capture_default_str();
  add_common(sample, {"text", "json", "dot"});

  CoupleArgs couple_args;
  auto* couple = app.add_subcommand("couple", "Nested samples over an increasing parameter grid");
  couple->add_option("--grid", couple_args.grid, "Comma-separated increasing parameters in [1/2, 1)")->required();
  couple->add_option("--depth", couple_args.depth, "Depth horizon")->capture_default_str();
  couple->add_option("--samples", couple_args.samples, "Number of samples")->capture_default_str();
  couple->add_option("--emit", couple_args.emit, "Samples to print (-1: all, 0: summary only)")->capture_default_str();
  couple->add_option("--exact-cap", couple_args.exact_cap, "Exact transport steps for the finite chain")->capture_default_str();
  couple->add_flag("--exact-tiny", couple_args.exact_tiny, "Exact root-degree transport at mixed slots near the horizon");
  couple->add_option("--tiny-max-size", couple_args.tiny_max_size, "Largest finite size for --exact-tiny")->capture_default_str();
  couple->add_flag("--traces", couple_args.traces, "Record the ladder at every vertex (json)");
  couple->add_flag("--flags", couple_args.flags, "Record every flagged slot");
  add_common(couple, {"text", "json", "dot"});

  VerifyArgs verify_args;
  auto* verify = app.add_subcommand("verify", "Run verification suites");
  std::string suite_names = "all";
  for (auto s : kAllSuites) suite_names += std::string("|") + to_string(s);
  verify->add_option("suites", verify_args.suites, "Suites to run: " + suite_names);
  verify->add_option("--scale", verify_args.scale, "Multiplier on Monte Carlo sample counts")->capture_default_str();
  verify->add_option("--significance", verify_args.significance, "Family-wise level per suite")->capture_default_str();
  verify->add_option("--exact-cap", verify_args.exact_cap, "Exact transport steps")->capture_default_str();
  verify->add_flag("--timing", verify_args.timing, "Include runtimes (output then differs between runs)");
  add_common(verify, {"text", "json"});

  TransportArgs transport_args;
  auto* transport = app.add_subcommand("transport", "Export the exact transport plan between sizes k and k+1 as CSV");
  transport->add_option("--k", transport_args.k, "Smaller tree size")->required();
  add_common(transport, {"csv"});
  common.format = "text";

  NaiveArgs naive_args;
  auto* demo = app.add_subcommand("demo", "Demonstrations");
  demo->require_subcommand(1);
  auto* naive = demo->add_subcommand("naive", "Why the sequential samplers cannot be coupled slot by slot");
  naive->add_option("--p1", naive_args.p1, "Smaller parameter")->required();
  naive->add_option("--p2", naive_args.p2, "Larger parameter")->required();
  add_common(naive, {"text", "json"});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? Ok : UsageError;
  }
  if (transport->parsed() && common.format == "text") common.format = "csv";

  std::ofstream file;
  if (!common.output.empty()) {
    file.open(common.output, std::ios::binary);
    if (!file) {
      err << "error: cannot open '" << common.output << "' for writing\n";
      return UsageError;
    }
  }
  std::ostream& dest = common.output.empty() ? out : file;
  try {
    if (sample->parsed()) return cmd_sample(common, sample_args, dest);
    if (couple->parsed()) return cmd_couple(common, couple_args, dest);
    if (verify->parsed()) return cmd_verify(common, verify_args, dest);
    if (transport->parsed()) return cmd_transport(transport_args, dest);
    if (naive->parsed()) return cmd_demo_naive(common, naive_args, dest);
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return UsageError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return UsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return UsageError;
  }
  return UsageError;
}

/// Convenience overload; `args` excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"gwcouple"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace gwcouple
