#pragma once

#include <string>
#include <vector>

#include "expi/loss.hpp"
#include "expi/refinenet.hpp"

namespace expi {

// Adam with the usual fixed moments (beta1=0.9, beta2=0.999, eps=1e-8).
class AdamOptimizer {
  public:
    AdamOptimizer(std::vector<ParamRef> params, double lr);
    void step();

  private:
    std::vector<ParamRef> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_;
    long t_ = 0;
};

enum class ReconKind { hybrid, l1, l2 };

struct TrainOptions {
    NetConfig net;
    PsiParams psi;
    LossWeights weights;
    ReconKind recon = ReconKind::hybrid;
    std::uint64_t sample_seed = 7; // patch sampling RNG, independent of init
};

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double l_r = 0.0;
    double l_c = 0.0;
    double l_f = 0.0;
    double psnr = 0.0;
};

struct ResidualPair {
    FloatImage y0;
    FloatImage y;
};

struct DirectTriple {
    FloatImage x1;
    FloatImage x2;
    FloatImage y;
};

struct TrainResult {
    std::vector<EpochStats> history;
};

// header "epoch,loss,l_r,l_c,l_f,psnr"
void save_history_csv(const std::string& path, const std::vector<EpochStats>& history);

// Train the residual refinement net on (y0, y) pairs: random crops and
// flips with a fixed-seed RNG, Adam updates, one batch per pair per epoch.
// Per-epoch PSNR is measured on refined full images of the first pairs.
TrainResult train(RefineNet& net, const std::vector<ResidualPair>& pairs,
                  const TrainOptions& opt);

// Same trainer driving the direct (x1,x2)->y baseline.
TrainResult train_direct_baseline(DirectNet& net, const std::vector<DirectTriple>& triples,
                                  const TrainOptions& opt);

// First epoch whose mean loss is <= threshold, or epochs+1 when never reached.
int epochs_to_threshold(const std::vector<EpochStats>& history, double threshold);

} // namespace expi
