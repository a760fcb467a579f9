/* vpme: command line front end.
 *
 * Subcommands map one-to-one onto the scenario functions; the only logic
 * living here is flag plumbing and the exit-code contract:
 *   0  every in-scenario check passed
 *   1  a check failed (or an unexpected runtime error)
 *   2  configuration rejected
 *   3  a field solve failed to converge
 * Failures are reported as one JSON object on stderr so callers never have
 * to parse prose.
 */

#include <cstdio>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vpme/scenarios.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out = "out";
  long long seed = -1;
  bool seed_set = false;
  bool quiet = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "run configuration file");
  sub->add_option("--out", f.out, "output directory")->capture_default_str();
  sub->add_option("--seed", f.seed, "override the config seed")
      ->check(CLI::NonNegativeNumber);
  sub->add_flag("--quiet", f.quiet, "suppress progress lines");
}

vpme::RunConfig load(const Flags& f) {
  vpme::RunConfig rc =
      f.config.empty() ? vpme::RunConfig{} : vpme::parse_config(f.config);
  if (f.seed_set) rc.sim.seed = static_cast<uint64_t>(f.seed);
  return rc;
}

void report_failure(const char* type, const std::string& what) {
  nlohmann::json j{{"error", {{"type", type}, {"what", what}}}};
  std::fprintf(stderr, "%s\n", j.dump().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vpme: kinetic ions with Boltzmann electrons on the torus"};
  app.require_subcommand(1);

  Flags f;
  CLI::App* sp = app.add_subcommand(
      "solve-poisson", "one field solve of the configured initial data");
  CLI::App* sim = app.add_subcommand(
      "simulate", "march the ensemble and record diagnostics");
  CLI::App* st = app.add_subcommand(
      "stability", "coupled twin run plus stability inequality sweeps");
  CLI::App* vf = app.add_subcommand(
      "verify", "full property battery at desk scale");
  for (CLI::App* sub : {sp, sim, st, vf}) add_common(sub, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    // CLI11's own codes are not part of our contract; --help stays 0,
    // anything else is a configuration problem
    return code == 0 ? 0 : 2;
  }
  f.seed_set = app.get_subcommands().front()->count("--seed") > 0;

  try {
    vpme::RunConfig rc = load(f);
    if (sp->parsed()) return vpme::scenarios::solve_poisson(rc, f.out, f.quiet);
    if (sim->parsed()) return vpme::scenarios::simulate(rc, f.out, f.quiet);
    if (st->parsed()) return vpme::scenarios::stability(rc, f.out, f.quiet);
    return vpme::scenarios::verify(rc, f.out, f.quiet);
  } catch (const vpme::NoConvergence& e) {
    report_failure("no_convergence", e.what());
    return 3;
  } catch (const vpme::ConfigError& e) {
    report_failure("config", e.what());
    return 2;
  } catch (const std::exception& e) {
    report_failure("runtime", e.what());
    return 1;
  }
}
