// sfb: command-line front end for the singletfb library. Talks to the library
// exclusively through the C API in singletfb/sfb.h.

#include <singletfb/sfb.h>

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"

namespace {

struct ConfigGuard {
  sfb_config* cfg = nullptr;
  ~ConfigGuard() { sfb_config_free(cfg); }
};

int fail_with(const sfb_error& err) {
  std::fprintf(stderr, "ERROR %s %s\n", sfb_status_name(err.code), err.message);
  return sfb_exit_code(err.code);
}

int run_config(sfb_config* cfg, const std::string& mode, const std::string& out,
               const std::string& threads, const std::string& seed) {
  sfb_error err{};
  if (!mode.empty() && sfb_config_set(cfg, "mode", mode.c_str(), &err) != SFB_OK)
    return fail_with(err);
  if (!threads.empty() && sfb_config_set(cfg, "threads", threads.c_str(), &err) != SFB_OK)
    return fail_with(err);
  if (!seed.empty() && sfb_config_set(cfg, "seed", seed.c_str(), &err) != SFB_OK)
    return fail_with(err);
  char summary[1024];
  if (sfb_run(cfg, out.empty() ? nullptr : out.c_str(), summary, sizeof(summary), &err) != SFB_OK)
    return fail_with(err);
  std::printf("%s\n", summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"singlet-state stabilization simulator"};
  app.set_version_flag("--version", std::string("sfb ") + sfb_version());
  app.require_subcommand(1);

  std::string config_path, out_path, threads, seed;
  std::string figure_name;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config_path, "config file (key = value lines)");
    if (config_required) opt->required();
    sub->add_option("--out", out_path, "output CSV path (overrides config 'out')");
    sub->add_option("--threads", threads, "worker threads for sweeps/trajectories");
    sub->add_option("--seed", seed, "RNG seed for trajectories");
  };

  std::vector<std::pair<CLI::App*, std::string>> mode_subs;
  for (const char* m : {"steady", "evolve", "sweep", "traj", "oracle"}) {
    CLI::App* sub = app.add_subcommand(m, std::string("run mode '") + m + "'");
    add_common(sub, true);
    mode_subs.emplace_back(sub, m);
  }

  CLI::App* figure = app.add_subcommand("figure", "run a named figure preset");
  figure->add_option("name", figure_name, "preset name (see 'sfb presets')")->required();
  add_common(figure, false);

  CLI::App* presets = app.add_subcommand("presets", "list figure preset names");

  CLI11_PARSE(app, argc, argv);

  sfb_error err{};
  if (presets->parsed()) {
    char buf[512];
    if (sfb_preset_names(buf, sizeof(buf), nullptr, &err) != SFB_OK) return fail_with(err);
    std::printf("%s\n", buf);
    return 0;
  }

  ConfigGuard guard;
  if (figure->parsed()) {
    size_t needed = 0;
    sfb_preset(figure_name.c_str(), nullptr, 0, &needed, nullptr);
    std::vector<char> text(needed > 0 ? needed : 1);
    if (sfb_preset(figure_name.c_str(), text.data(), text.size(), nullptr, &err) != SFB_OK)
      return fail_with(err);
    if (sfb_config_parse(text.data(), &guard.cfg, &err) != SFB_OK) return fail_with(err);
    if (!config_path.empty()) {
      std::fprintf(stderr, "ERROR E_INVALID --config is not accepted with 'figure'\n");
      return 1;
    }
    return run_config(guard.cfg, "", out_path, threads, seed);
  }

  for (const auto& [sub, mode] : mode_subs) {
    if (sub->parsed()) {
      if (sfb_config_parse_file(config_path.c_str(), &guard.cfg, &err) != SFB_OK)
        return fail_with(err);
      return run_config(guard.cfg, mode, out_path, threads, seed);
    }
  }
  std::fprintf(stderr, "ERROR E_INVALID no subcommand\n");
  return 1;
}
