// ccan <command> [--config FILE] [--key value ...]
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccan/ccan.h"

namespace {

int report(ccan_status status) {
  std::fprintf(stderr, "ccan: %s: %s\n", ccan_status_string(status), ccan_last_error());
  return static_cast<int>(status);
}

struct ConfigHandle {
  ccan_config* ptr = nullptr;
  ~ConfigHandle() { ccan_config_destroy(ptr); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascaded cross-attention networks for whole-slide image classification"};
  app.allow_extras();
  app.set_version_flag("--version", ccan_version());
  std::string command, config_file;
  bool print_config = false;
  std::string jobs;
  app.add_option("command", command, std::string("one of: ") + ccan_command_list())->required();
  app.add_option("--config", config_file, "key = value settings file");
  app.add_option("--jobs", jobs, "sweep cells trained concurrently (same as --sweep.jobs)");
  app.add_flag("--print-config", print_config, "print the resolved configuration and exit");
  app.footer("Any setting can be overridden with --<key> <value> or --<key>=<value>, e.g. --model.J 2.\n"
             "CCAN_SEED sets the default root seed.");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  ConfigHandle cfg;
  if (ccan_status s = ccan_config_create(&cfg.ptr); s != CCAN_OK) return report(s);
  if (!config_file.empty()) {
    if (ccan_status s = ccan_config_load_file(cfg.ptr, config_file.c_str()); s != CCAN_OK) return report(s);
  }

  if (!jobs.empty()) {
    if (ccan_status s = ccan_config_set(cfg.ptr, "sweep.jobs", jobs.c_str()); s != CCAN_OK) return report(s);
  }

  const std::vector<std::string> extras = app.remaining();
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() == 2) {
      std::fprintf(stderr, "ccan: usage error: unexpected argument '%s'\n", arg.c_str());
      return static_cast<int>(CCAN_ERR_USAGE);
    }
    std::string key = arg.substr(2), value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else if (i + 1 < extras.size()) {
      value = extras[++i];
    } else {
      std::fprintf(stderr, "ccan: usage error: missing value for --%s\n", key.c_str());
      return static_cast<int>(CCAN_ERR_USAGE);
    }
    if (ccan_status s = ccan_config_set(cfg.ptr, key.c_str(), value.c_str()); s != CCAN_OK) return report(s);
  }

  if (print_config) {
    std::size_t needed = 0;
    ccan_config_dump(cfg.ptr, nullptr, 0, &needed);
    std::string text(needed, '\0');
    if (ccan_status s = ccan_config_dump(cfg.ptr, text.data(), text.size(), &needed); s != CCAN_OK) return report(s);
    std::fputs(text.c_str(), stdout);
    return 0;
  }
  if (ccan_status s = ccan_run(cfg.ptr, command.c_str()); s != CCAN_OK) return report(s);
  return 0;
}
