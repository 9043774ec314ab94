#pragma once

// Dual-stage dual-modality contrastive losses: column-local InfoNCE with
// sliding-window positive matching and bidirectional channel-spatial attention,
// and a global loss over row/column-aggregated scene vectors for six
// modality/view pairs.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "l2r/error.hpp"
#include "l2r/random.hpp"
#include "l2r/tensor.hpp"

namespace l2r::contrastive {

using tensor::Tensor;

enum class Modality { radar, image };
enum class View { bev, fv };

std::string to_string(Modality m);
std::string to_string(View v);

/// C x H x W feature tensor tagged with its sensor modality and view.
struct FeatureMap {
  Tensor tensor;
  Modality modality = Modality::radar;
  View view = View::bev;

  /// Throws RankError unless the tensor is rank 3, DomainError on non-finite values.
  static FeatureMap make(Tensor t, Modality m, View v);

  std::size_t channels() const { return tensor.shape()[0]; }
  std::size_t height() const { return tensor.shape()[1]; }
  std::size_t width() const { return tensor.shape()[2]; }
};

/// The four maps {image, radar} x {bev, fv} of one scene.
struct Scene {
  std::vector<FeatureMap> maps;

  /// Throws ContractError naming the missing modality/view.
  const FeatureMap& get(Modality m, View v) const;
};

struct ContrastiveConfig {
  double tau = 0.07;
  std::size_t search_width = 5;  ///< R, columns
  std::size_t window_width = 3;  ///< r, columns, r < R
  std::size_t batch_n = 4;       ///< columns drawn per scene for the local loss
  double lambda_global = 1.0 / 6.0;
  double ln_eps = 1e-5;
  double cos_eps = 1e-12;

  void validate() const;
};

struct BcsaParams {
  Tensor gate;             ///< C, sigmoid-gated blend of the two branches
  Tensor spatial_gain;     ///< C, layer-norm affine of the spatial branch
  Tensor spatial_bias;     ///< C
  Tensor channel_gain;     ///< C, layer-norm affine of the channel branch
  Tensor channel_bias;     ///< C

  /// gate 0 (even blend), gains 1, biases 0. All tensors require gradients.
  static BcsaParams init(std::size_t channels);
  std::vector<Tensor> tensors() const;
};

struct GlobalAggParams {
  Tensor row_proj;  ///< 2C
  Tensor col_proj;  ///< 2C

  /// N(0, stddev^2) entries drawn from CounterRng(seed).
  static GlobalAggParams init(std::size_t channels, std::uint64_t seed, double stddev = 0.02);
  std::vector<Tensor> tensors() const;
};

// InfoNCE ------------------------------------------------------------------------

/// -(1/N) sum_i log softmax_j(sim(a_i, c_j) / tau)_i over N x D rows, with
/// cosine similarity.
Tensor info_nce(const Tensor& anchors, const Tensor& candidates, double tau, double eps = 1e-12);

// Sliding-window matching ----------------------------------------------------------

struct WindowMatch {
  int offset = 0;            ///< delta: matched window center minus the anchor column
  Tensor aggregate;          ///< C x H, attention-pooled window
  double similarity = 0.0;
  std::vector<std::size_t> columns;  ///< columns of the matched window
  std::vector<double> weights;       ///< attention weights over `columns`
  std::size_t candidates_evaluated = 0;
};

/// Candidate windows of width r slide through the width-R search area around
/// `column`. Each window is pooled into one C x H column with softmax weights
/// over (cosine to the anchor - distance from the window center); the pooled
/// column most cosine-similar to the anchor wins. Ties (within 1e-12) go to
/// the smaller |delta|, then the smaller delta. Windows are clipped to the map
/// and skipped when their center falls outside it.
WindowMatch sliding_window_match(const Tensor& anchor, const Tensor& search_map, std::size_t column,
                                 std::size_t search_width, std::size_t window_width, double eps = 1e-12);

// BCSA -----------------------------------------------------------------------------

struct BcsaOutput {
  Tensor first;   ///< D x C refined F1
  Tensor second;  ///< D x C refined F2
  /// Row-stochastic attention matrices: spatial (D x D) and channel (C x C)
  /// for each direction.
  std::array<Tensor, 2> spatial_attention;
  std::array<Tensor, 2> channel_attention;
};

/// Bidirectional channel-spatial attention over a D x C feature pair.
BcsaOutput bcsa(const Tensor& f1, const Tensor& f2, const BcsaParams& params, double ln_eps = 1e-5);

// Local loss -----------------------------------------------------------------------

struct LocalDiagnostics {
  std::vector<std::size_t> columns;
  std::vector<int> offsets;
  Tensor refined_anchors;     ///< N x (H*C)
  Tensor refined_candidates;  ///< N x (H*C)
};

/// Column-level InfoNCE between a radar and an image map of one scene.
/// Throws ConfigError when batch_n exceeds the map width.
Tensor local_loss(const FeatureMap& radar, const FeatureMap& image, const ContrastiveConfig& config,
                  const BcsaParams& params, CounterRng& rng, LocalDiagnostics* diagnostics = nullptr);

/// Mean of local_loss over the BEV maps of every scene, in batch order.
Tensor column_loss(std::span<const Scene> batch, const ContrastiveConfig& config, const BcsaParams& params,
                   CounterRng& rng, std::vector<LocalDiagnostics>* diagnostics = nullptr);

// Global loss ----------------------------------------------------------------------

struct GlobalAggregate {
  Tensor first;        ///< C
  Tensor second;       ///< C
  Tensor row_weights;  ///< 1 x H
  Tensor col_weights;  ///< 1 x W
};

/// Row-then-column attention pooling of a pair of C x H x W maps with weights
/// shared across the pair.
GlobalAggregate aggregate_global(const Tensor& fa, const Tensor& fb, const GlobalAggParams& params);

struct MapKey {
  Modality modality;
  View view;
};

/// The six contrasted pairs, in the order they are summed.
inline constexpr std::array<std::array<MapKey, 2>, 6> kGlobalPairs = {{
    {{{Modality::image, View::bev}, {Modality::image, View::fv}}},
    {{{Modality::image, View::bev}, {Modality::radar, View::fv}}},
    {{{Modality::image, View::bev}, {Modality::radar, View::bev}}},
    {{{Modality::image, View::fv}, {Modality::radar, View::bev}}},
    {{{Modality::image, View::fv}, {Modality::radar, View::fv}}},
    {{{Modality::radar, View::bev}, {Modality::radar, View::fv}}},
}};

struct GlobalDiagnostics {
  std::vector<double> pair_losses;
};

/// Sum over the six pairs of batch InfoNCE between per-scene global vectors.
/// Throws ContractError for batches with fewer than two scenes.
Tensor global_loss(std::span<const Scene> batch, const ContrastiveConfig& config, const GlobalAggParams& params,
                   GlobalDiagnostics* diagnostics = nullptr);

// Total ----------------------------------------------------------------------------

struct LossBreakdown {
  double local = 0.0;
  double global = 0.0;
  double total = 0.0;
  std::vector<LocalDiagnostics> local_diagnostics;
  GlobalDiagnostics global_diagnostics;
};

/// lambda_global * global_loss + column_loss.
Tensor total_loss(std::span<const Scene> batch, const ContrastiveConfig& config, const BcsaParams& bcsa_params,
                  const GlobalAggParams& global_params, CounterRng& rng, LossBreakdown* breakdown = nullptr);

// Toy pretraining ---------------------------------------------------------------

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step) : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

struct TrainOptions {
  std::size_t steps = 200;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  bool learn_features = true;
};

struct TrainTrace {
  std::vector<double> losses;  ///< loss before each update
  double initial_loss = 0.0;
  double final_loss = 0.0;     ///< after the last update
  double final_pos_sim = 0.0;  ///< mean cosine of matched refined column pairs
  double final_neg_sim = 0.0;  ///< mean cosine of unmatched refined column pairs
  std::uint64_t seed = 0;
};

/// Plain gradient descent on the attention parameters and, optionally, the
/// feature maps of a fixed batch. Every step selects columns from the same
/// random stream (seed), so the objective is a fixed function of the
/// parameters. Throws DivergenceError on a non-finite loss.
TrainTrace toy_pretrain(std::vector<Scene> batch, const ContrastiveConfig& config, const TrainOptions& options);

std::string to_json(const TrainTrace& trace);

// Gradient verification -------------------------------------------------------------

struct ComponentCheck {
  std::string name;
  double max_relative_error = 0.0;
  bool passed = false;
};

inline constexpr double kGradientTolerance = 1e-5;

/// Finite-difference checks of info_nce, bcsa, local_loss, aggregate_global,
/// global_loss and total_loss on seeded random instances. `corrupt` names a
/// component whose analytic gradient is deliberately scaled to exercise the
/// harness.
std::vector<ComponentCheck> run_gradient_checks(std::uint64_t seed, const std::string& corrupt = {});

}  // namespace l2r::contrastive
