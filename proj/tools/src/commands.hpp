// Subcommand implementations behind the command line front end. Each command
// receives the merged configuration (file values with flag overrides already
// applied) and an output directory that exists by the time it runs.

#pragma once

#include <string>

#include "fractfem/config.hpp"

namespace fractfem {
namespace cli {

struct CommonArgs {
  std::string outDir = "out";
  int threads = 1;
  unsigned seed = 12345;
  bool allowLarge = false;
};

int runMeshCommand(const Config& cfg, const CommonArgs& args);
int runAssembleCommand(const Config& cfg, const CommonArgs& args);
int runPoissonCommand(const Config& cfg, const CommonArgs& args);
int runScalingCommand(const Config& cfg, const CommonArgs& args);
int runHeatCommand(const Config& cfg, const CommonArgs& args);
int runBrusselatorCommand(const Config& cfg, const CommonArgs& args);
int runConditionCommand(const Config& cfg, const CommonArgs& args);

}  // namespace cli
}  // namespace fractfem
