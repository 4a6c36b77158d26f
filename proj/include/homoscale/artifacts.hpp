#ifndef HOMOSCALE_ARTIFACTS_HPP
#define HOMOSCALE_ARTIFACTS_HPP

#include <filesystem>
#include <fstream>
#include <string>

#include "homoscale/corrector.hpp"
#include "homoscale/flux.hpp"
#include "homoscale/snapshot.hpp"

namespace homoscale {

/// Directory serialization of built corrector and flux sets: one TNSR/1
/// snapshot per field plus a JSON manifest with the plan and diagnostics.
namespace artifacts {

inline nlohmann::json plan_json(const TruncationPlan& plan) {
  nlohmann::json j;
  j["tau"] = plan.tau;
  j["ell0"] = plan.ell0;
  j["gaps"] = nlohmann::json::array();
  for (const auto& g : plan.gaps) {
    j["gaps"].push_back({{"gap", g.gap},
                         {"eps", g.eps},
                         {"ratio", g.ratio},
                         {"bound", g.bound},
                         {"separated", g.separated},
                         {"k", g.k},
                         {"cond_delta", g.cond_delta},
                         {"cond_tau", g.cond_tau}});
  }
  return j;
}

inline void save_corrector_set(const CorrectorSet& set, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["kind"] = "corrector-set";
  manifest["deltas"] = set.deltas;
  manifest["tau"] = set.tau;
  manifest["plan"] = plan_json(set.plan);
  manifest["directions"] = nlohmann::json::array();
  for (std::size_t j = 0; j < set.X.size(); ++j) {
    nlohmann::json dirj;
    std::string xname = "X_" + std::to_string(j) + ".tnsr";
    snapshot::write(set.X[j], dir + "/" + xname);
    dirj["X"] = xname;
    dirj["sup_norm"] = set.sup_norm[j];
    dirj["mean"] = set.mean[j];
    dirj["defect_l2"] = set.detail[j].defect_l2;
    dirj["residual_l2"] = set.detail[j].residual_l2;
    if (set.detail[j].pieces) {
      const auto& pieces = *set.detail[j].pieces;
      std::string lname = "leading_" + std::to_string(j) + ".tnsr";
      snapshot::write(pieces.leading, dir + "/" + lname);
      dirj["leading"] = lname;
      nlohmann::json osc = nlohmann::json::array();
      for (std::size_t k = 0; k < pieces.osc.size(); ++k) {
        std::string name = "osc_" + std::to_string(j) + "_" + std::to_string(k + 1) + ".tnsr";
        snapshot::write(pieces.osc[k], dir + "/" + name);
        osc.push_back(name);
      }
      dirj["osc"] = osc;
      nlohmann::json reg = nlohmann::json::array();
      for (std::size_t k = 0; k < pieces.reg.size(); ++k) {
        std::string name = "reg_" + std::to_string(j) + "_" + std::to_string(k + 1) + ".tnsr";
        snapshot::write(pieces.reg[k], dir + "/" + name);
        reg.push_back(name);
      }
      dirj["reg"] = reg;
    }
    manifest["directions"].push_back(dirj);
  }
  std::ofstream out(dir + "/manifest.json");
  out << manifest.dump(2) << "\n";
}

inline void save_flux_set(const FluxSet& set, const std::string& dir) {
  std::filesystem::create_directories(dir);
  snapshot::write(set.U, dir + "/U.tnsr");
  snapshot::write(set.Phi, dir + "/Phi.tnsr");
  snapshot::write(set.G, dir + "/G.tnsr");
  nlohmann::json manifest;
  manifest["kind"] = "flux-set";
  manifest["deltas"] = set.deltas;
  manifest["tau"] = set.tau;
  manifest["defect_l2"] = set.defect_l2;
  manifest["child_defect_l2"] = set.child_defect_l2;
  manifest["mean_G"] = set.mean_G;
  manifest["fields"] = {{"U", "U.tnsr"}, {"Phi", "Phi.tnsr"}, {"G", "G.tnsr"}};
  std::ofstream out(dir + "/manifest.json");
  out << manifest.dump(2) << "\n";
}

}  // namespace artifacts

}  // namespace homoscale

#endif  // HOMOSCALE_ARTIFACTS_HPP
