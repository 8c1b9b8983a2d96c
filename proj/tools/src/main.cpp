// Command line front end: subcommand dispatch, config file loading, and
// flag-over-file merging. Each experiment writes its outputs under --out and
// saves the effective configuration next to them.

#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "commands.hpp"
#include "fractfem/config.hpp"

namespace {

struct FlagOverrides {
  std::string config;
  double s = -1.0;
  int level = -1;
  int minLevel = -1;
  int maxLevel = -1;
};

// Flags override file values; both end up in the same Config so experiments
// read from a single source and the saved effective config is complete.
// `section` names the subcommand's config section for the level overrides;
// `levelKey` is the single-level key of the commands that take one level.
fractfem::Config mergedConfig(const FlagOverrides& f, const char* section,
                              const char* levelKey) {
  fractfem::Config cfg = f.config.empty()
                             ? fractfem::Config()
                             : fractfem::Config::parseFile(f.config);
  if (f.s >= 0.0) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", f.s);
    cfg.set("run.s", buf);
  }
  if (f.level >= 0 && levelKey != nullptr)
    cfg.set(levelKey, std::to_string(f.level));
  if (section != nullptr) {
    const std::string p(section);
    if (f.minLevel >= 0)
      cfg.set(p + ".min_level", std::to_string(f.minLevel));
    if (f.maxLevel >= 0)
      cfg.set(p + ".max_level", std::to_string(f.maxLevel));
  }
  return cfg;
}

void addCommon(CLI::App* sub, FlagOverrides& f,
               fractfem::cli::CommonArgs& args) {
  sub->add_option("--config", f.config, "configuration file (key = value)")
      ->check(CLI::ExistingFile);
  sub->add_option("--out", args.outDir, "output directory");
  sub->add_option("--threads", args.threads, "worker threads (1 = serial)")
      ->check(CLI::Range(1, 64));
  sub->add_option("--seed", args.seed, "random seed for seeded experiments");
  sub->add_flag("--allow-large", args.allowLarge,
                "override the desk-scale problem size caps");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite element experiments for the integral fractional "
               "Laplacian on polygonal domains"};
  app.require_subcommand(1);

  FlagOverrides f;
  fractfem::cli::CommonArgs args;

  auto* mesh = app.add_subcommand("mesh", "build and write a mesh");
  auto* assemble =
      app.add_subcommand("assemble", "assemble a stiffness operator");
  auto* poisson =
      app.add_subcommand("poisson", "steady-state convergence study");
  auto* scaling =
      app.add_subcommand("scaling", "memory and assembly-time audit");
  auto* heat = app.add_subcommand("heat", "implicit heat stepping sweep");
  auto* brusselator =
      app.add_subcommand("brusselator", "two-species reaction-diffusion run");
  auto* condition =
      app.add_subcommand("condition", "extremal eigenvalue sweep");

  for (CLI::App* sub :
       {mesh, assemble, poisson, scaling, heat, brusselator, condition}) {
    addCommon(sub, f, args);
  }
  for (CLI::App* sub : {assemble, poisson, scaling, heat, condition}) {
    sub->add_option("--s", f.s, "fractional order in (0, 1)");
  }
  mesh->add_option("--level", f.level, "disk refinement level");
  assemble->add_option("--level", f.level, "mesh level to assemble");
  brusselator->add_option("--level", f.level, "mesh level for the run");
  for (CLI::App* sub : {poisson, scaling, heat, condition}) {
    sub->add_option("--min-level", f.minLevel, "first level of the sweep");
    sub->add_option("--max-level", f.maxLevel, "last level of the sweep");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(args.outDir);

    if (mesh->parsed()) {
      return fractfem::cli::runMeshCommand(mergedConfig(f, nullptr, "mesh.level"),
                                           args);
    }
    if (assemble->parsed()) {
      return fractfem::cli::runAssembleCommand(
          mergedConfig(f, nullptr, "assemble.level"), args);
    }
    if (poisson->parsed()) {
      return fractfem::cli::runPoissonCommand(
          mergedConfig(f, "poisson", nullptr), args);
    }
    if (scaling->parsed()) {
      return fractfem::cli::runScalingCommand(
          mergedConfig(f, "scaling", nullptr), args);
    }
    if (heat->parsed()) {
      return fractfem::cli::runHeatCommand(mergedConfig(f, "heat", nullptr),
                                           args);
    }
    if (brusselator->parsed()) {
      return fractfem::cli::runBrusselatorCommand(
          mergedConfig(f, nullptr, "brusselator.level"), args);
    }
    if (condition->parsed()) {
      return fractfem::cli::runConditionCommand(
          mergedConfig(f, "condition", nullptr), args);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
