#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "qmix/json_io.hpp"

int main(int argc, char** argv) {
  using namespace qmix::cli;
  CLI::App app{"Classical and interference mixture experiments"};
  Options opt;
  std::uint64_t seed = 0;
  app.add_option("command", opt.command, "generate | fit | trials | overlap | landscape | deform | segment")
      ->required()
      ->check(CLI::IsMember({"generate", "fit", "trials", "overlap", "landscape", "deform", "segment"}));
  app.add_option("--config", opt.config_path, "JSON configuration file")->required();
  auto* seed_opt = app.add_option("--seed", seed, "Seed; overrides the config's seed");
  app.add_option("--jobs", opt.jobs, "Worker threads for trials (0: all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", opt.out_dir, "Output directory");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  if (*seed_opt) opt.seed = seed;

  auto report = [](const qmix::Json& j) { std::cerr << j.dump() << "\n"; };
  try {
    return run(opt);
  } catch (const UsageError& e) {
    report({{"error", "Usage"}, {"message", e.what()}});
    return kExitUsage;
  } catch (const qmix::Error& e) {
    report(qmix::error_json(e));
    switch (e.code()) {
      case qmix::ErrorCode::IO:
      case qmix::ErrorCode::UnsupportedFormat:
      case qmix::ErrorCode::InvalidArgument:
      case qmix::ErrorCode::LengthMismatch:
        return kExitUsage;
      default:
        return kExitNumerical;
    }
  } catch (const std::exception& e) {
    report({{"error", "Internal"}, {"message", e.what()}});
    return kExitNumerical;
  }
}
