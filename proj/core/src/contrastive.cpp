#include "l2r/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "json.hpp"

namespace l2r::contrastive {

using namespace l2r::tensor;

std::string to_string(Modality m) { return m == Modality::radar ? "radar" : "image"; }
std::string to_string(View v) { return v == View::bev ? "bev" : "fv"; }

FeatureMap FeatureMap::make(Tensor t, Modality m, View v) {
  if (t.rank() != 3) throw RankError("feature map must be C x H x W, got " + tensor::to_string(t.shape()));
  for (double x : t.data()) {
    if (!std::isfinite(x)) throw DomainError("feature map holds a non-finite value");
  }
  return FeatureMap{std::move(t), m, v};
}

const FeatureMap& Scene::get(Modality m, View v) const {
  for (const auto& f : maps) {
    if (f.modality == m && f.view == v) return f;
  }
  throw ContractError("scene is missing the " + to_string(m) + "/" + to_string(v) + " feature map");
}

void ContrastiveConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (window_width == 0) throw ConfigError("window width r must be >= 1");
  if (!(window_width < search_width)) throw ConfigError("window width r must be smaller than search width R");
  if (batch_n == 0) throw ConfigError("batch_n must be >= 1");
  if (!(lambda_global >= 0.0)) throw ConfigError("lambda_global must be >= 0");
}

BcsaParams BcsaParams::init(std::size_t channels) {
  return BcsaParams{Tensor::zeros({channels}, true), Tensor::full({channels}, 1.0, true),
                    Tensor::zeros({channels}, true), Tensor::full({channels}, 1.0, true),
                    Tensor::zeros({channels}, true)};
}

std::vector<Tensor> BcsaParams::tensors() const {
  return {gate, spatial_gain, spatial_bias, channel_gain, channel_bias};
}

GlobalAggParams GlobalAggParams::init(std::size_t channels, std::uint64_t seed, double stddev) {
  CounterRng rng(seed, 0x61676721);
  auto row = Tensor::randn({2 * channels}, rng, stddev, true);
  auto col = Tensor::randn({2 * channels}, rng, stddev, true);
  return GlobalAggParams{row, col};
}

std::vector<Tensor> GlobalAggParams::tensors() const { return {row_proj, col_proj}; }

// InfoNCE ------------------------------------------------------------------------

Tensor info_nce(const Tensor& anchors, const Tensor& candidates, double tau, double eps) {
  if (anchors.rank() != 2 || anchors.shape() != candidates.shape()) {
    throw DimensionError("info_nce: anchors " + tensor::to_string(anchors.shape()) + " and candidates " +
                         tensor::to_string(candidates.shape()) + " must both be N x D");
  }
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  const Tensor a = l2_normalize(anchors, eps);
  const Tensor c = l2_normalize(candidates, eps);
  const Tensor logits = scale(matmul(a, transpose_last2(c)), 1.0 / tau);
  const Tensor picked = diagonal(log_softmax(logits, 1));
  // Adding +0.0 turns the N = 1 result -0.0 into 0.0.
  return add_scalar(scale(mean(picked), -1.0), 0.0);
}

// Sliding-window matching ----------------------------------------------------------

namespace {

struct Window {
  int delta = 0;
  long center = 0;
  std::vector<std::size_t> columns;
};

std::vector<double> column_of(const Tensor& map, std::size_t k) {
  const std::size_t c = map.shape()[0], h = map.shape()[1], w = map.shape()[2];
  std::vector<double> out(c * h);
  const auto d = map.data();
  for (std::size_t i = 0; i < c * h; ++i) out[i] = d[i * w + k];
  return out;
}

std::vector<double> window_weights(const Window& win, const std::vector<std::vector<double>>& cols,
                                   std::span<const double> anchor, double eps) {
  std::vector<double> logits(win.columns.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    logits[i] = cosine_sim(anchor, cols[i], eps) -
                static_cast<double>(std::labs(static_cast<long>(win.columns[i]) - win.center));
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (auto& l : logits) z += (l = std::exp(l - mx));
  for (auto& l : logits) l /= z;
  return logits;
}

}  // namespace

WindowMatch sliding_window_match(const Tensor& anchor, const Tensor& search_map, std::size_t column,
                                 std::size_t search_width, std::size_t window_width, double eps) {
  if (search_map.rank() != 3) {
    throw RankError("search map must be C x H x W, got " + tensor::to_string(search_map.shape()));
  }
  const std::size_t c = search_map.shape()[0], h = search_map.shape()[1], w = search_map.shape()[2];
  if (anchor.shape() != Shape{c, h}) {
    throw DimensionError("anchor " + tensor::to_string(anchor.shape()) + " does not match search map " +
                         tensor::to_string(search_map.shape()));
  }
  if (column >= w) throw DimensionError("anchor column " + std::to_string(column) + " outside the map");
  if (window_width == 0 || !(window_width < search_width)) {
    throw ConfigError("sliding window needs 1 <= r < R");
  }

  const long r = static_cast<long>(window_width);
  const long first_start = static_cast<long>(column) - static_cast<long>(search_width / 2);
  const long n = static_cast<long>(search_width - window_width + 1);
  std::vector<Window> windows;
  for (long m = 0; m < n; ++m) {
    const long start = first_start + m;
    const long center = start + r / 2;
    if (center < 0 || center >= static_cast<long>(w)) continue;
    Window win{static_cast<int>(center - static_cast<long>(column)), center, {}};
    for (long k = std::max(0L, start); k < std::min(start + r, static_cast<long>(w)); ++k) {
      win.columns.push_back(static_cast<std::size_t>(k));
    }
    windows.push_back(std::move(win));
  }
  std::stable_sort(windows.begin(), windows.end(), [](const Window& a, const Window& b) {
    return std::abs(a.delta) < std::abs(b.delta) || (std::abs(a.delta) == std::abs(b.delta) && a.delta < b.delta);
  });

  const auto anchor_values = anchor.data();
  const Window* best = nullptr;
  double best_sim = 0.0;
  std::vector<double> best_weights;
  for (const auto& win : windows) {
    std::vector<std::vector<double>> cols;
    for (auto k : win.columns) cols.push_back(column_of(search_map, k));
    const auto wts = window_weights(win, cols, anchor_values, eps);
    std::vector<double> pooled(c * h, 0.0);
    for (std::size_t i = 0; i < cols.size(); ++i)
      for (std::size_t e = 0; e < pooled.size(); ++e) pooled[e] += wts[i] * cols[i][e];
    const double sim = cosine_sim(anchor_values, pooled, eps);
    if (best == nullptr || sim > best_sim + 1e-12) {
      best = &win;
      best_sim = sim;
      best_weights = wts;
    }
  }

  // Differentiable pooling of the chosen window.
  const std::size_t m = best->columns.size();
  const Tensor cols = reshape(index_select(search_map, 2, best->columns), {c * h, m});
  const Tensor cols_n = l2_normalize(transpose_last2(cols), eps);           // m x CH
  const Tensor anchor_n = l2_normalize(reshape(anchor, {1, c * h}), eps);   // 1 x CH
  std::vector<double> prior(m);
  for (std::size_t i = 0; i < m; ++i) {
    prior[i] = -static_cast<double>(std::labs(static_cast<long>(best->columns[i]) - best->center));
  }
  const Tensor logits = add(matmul(cols_n, transpose_last2(anchor_n)), Tensor({m, 1}, prior));
  const Tensor weights = softmax(logits, 0);
  const Tensor pooled = reshape(matmul(cols, weights), {c, h});

  WindowMatch out;
  out.offset = best->delta;
  out.aggregate = pooled;
  out.similarity = cosine_sim(anchor, pooled, eps);
  out.columns = best->columns;
  out.weights.assign(weights.data().begin(), weights.data().end());
  out.candidates_evaluated = windows.size();
  return out;
}

// BCSA -----------------------------------------------------------------------------

BcsaOutput bcsa(const Tensor& f1, const Tensor& f2, const BcsaParams& params, double ln_eps) {
  if (f1.rank() != 2 || f1.shape() != f2.shape()) {
    throw DimensionError("bcsa: features " + tensor::to_string(f1.shape()) + " and " +
                         tensor::to_string(f2.shape()) + " must share one D x C shape");
  }
  const std::size_t d = f1.shape()[0], c = f1.shape()[1];
  for (const auto& p : params.tensors()) {
    if (p.shape() != Shape{c}) {
      throw DimensionError("bcsa parameters have shape " + tensor::to_string(p.shape()) + ", expected (" +
                           std::to_string(c) + ")");
    }
  }
  const Shape dc{d, c};
  const Tensor gate = broadcast_to(sigmoid(params.gate), dc);
  const Tensor s_gain = broadcast_to(params.spatial_gain, dc);
  const Tensor s_bias = broadcast_to(params.spatial_bias, dc);
  const Tensor c_gain = broadcast_to(params.channel_gain, dc);
  const Tensor c_bias = broadcast_to(params.channel_bias, dc);
  const double spatial_scale = 1.0 / std::sqrt(static_cast<double>(c));
  const double channel_scale = 1.0 / std::sqrt(static_cast<double>(d));

  BcsaOutput out;
  auto refine = [&](const Tensor& q, const Tensor& kv, std::size_t slot) {
    // Positions attend over positions, keys of width C.
    const Tensor a_s = softmax(scale(matmul(q, transpose_last2(kv)), spatial_scale), 1);
    const Tensor spatial = add(mul(layer_norm(matmul(a_s, kv), 1, ln_eps), s_gain), s_bias);
    // Channels attend over channels, keys of width D.
    const Tensor q_t = transpose_last2(q);
    const Tensor kv_t = transpose_last2(kv);
    const Tensor a_c = softmax(scale(matmul(q_t, kv), channel_scale), 1);
    const Tensor channel =
        add(mul(layer_norm(transpose_last2(matmul(a_c, kv_t)), 1, ln_eps), c_gain), c_bias);
    out.spatial_attention[slot] = a_s;
    out.channel_attention[slot] = a_c;
    return add(channel, mul(gate, sub(spatial, channel)));
  };
  out.first = refine(f1, f2, 0);
  out.second = refine(f2, f1, 1);
  return out;
}

// Local loss -----------------------------------------------------------------------

Tensor local_loss(const FeatureMap& radar, const FeatureMap& image, const ContrastiveConfig& config,
                  const BcsaParams& params, CounterRng& rng, LocalDiagnostics* diagnostics) {
  config.validate();
  if (radar.tensor.shape() != image.tensor.shape()) {
    throw DimensionError("local_loss: radar map " + tensor::to_string(radar.tensor.shape()) + " and image map " +
                         tensor::to_string(image.tensor.shape()) + " differ");
  }
  const std::size_t c = radar.channels(), h = radar.height(), w = radar.width();
  if (config.batch_n > w) {
    throw ConfigError("batch_n " + std::to_string(config.batch_n) + " exceeds the map width " + std::to_string(w));
  }

  // Partial Fisher-Yates: the first batch_n entries are a uniform draw without replacement.
  std::vector<std::size_t> pool(w);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < config.batch_n; ++i) {
    const std::size_t k = i + static_cast<std::size_t>(rng.below(w - i));
    std::swap(pool[i], pool[k]);
  }
  pool.resize(config.batch_n);

  std::vector<Tensor> anchors, candidates;
  std::vector<int> offsets;
  for (std::size_t j : pool) {
    const std::size_t col[] = {j};
    const Tensor anchor = reshape(index_select(radar.tensor, 2, col), {c, h});
    const auto match =
        sliding_window_match(anchor, image.tensor, j, config.search_width, config.window_width, config.cos_eps);
    const auto refined = bcsa(transpose_last2(anchor), transpose_last2(match.aggregate), params, config.ln_eps);
    anchors.push_back(reshape(refined.first, {h * c}));
    candidates.push_back(reshape(refined.second, {h * c}));
    offsets.push_back(match.offset);
  }
  const Tensor a = stack(anchors);
  const Tensor b = stack(candidates);
  if (diagnostics) *diagnostics = LocalDiagnostics{pool, offsets, a, b};
  return info_nce(a, b, config.tau, config.cos_eps);
}

Tensor column_loss(std::span<const Scene> batch, const ContrastiveConfig& config, const BcsaParams& params,
                   CounterRng& rng, std::vector<LocalDiagnostics>* diagnostics) {
  if (batch.empty()) throw ContractError("column_loss needs at least one scene");
  std::vector<Tensor> parts;
  if (diagnostics) diagnostics->clear();
  for (const auto& scene : batch) {
    LocalDiagnostics diag;
    parts.push_back(local_loss(scene.get(Modality::radar, View::bev), scene.get(Modality::image, View::bev), config,
                               params, rng, diagnostics ? &diag : nullptr));
    if (diagnostics) diagnostics->push_back(std::move(diag));
  }
  return mean(stack(parts));
}

// Global loss ----------------------------------------------------------------------

GlobalAggregate aggregate_global(const Tensor& fa, const Tensor& fb, const GlobalAggParams& params) {
  if (fa.rank() != 3 || fa.shape() != fb.shape()) {
    throw DimensionError("aggregate_global: maps " + tensor::to_string(fa.shape()) + " and " +
                         tensor::to_string(fb.shape()) + " must share one C x H x W shape");
  }
  const std::size_t c = fa.shape()[0], h = fa.shape()[1], w = fa.shape()[2];
  if (params.row_proj.shape() != Shape{2 * c} || params.col_proj.shape() != Shape{2 * c}) {
    throw DimensionError("global projections must have length 2C = " + std::to_string(2 * c));
  }
  const Tensor row_proj = reshape(params.row_proj, {1, 2 * c});
  const Tensor col_proj = reshape(params.col_proj, {1, 2 * c});

  // Rows: scores from the width-averaged concatenated pair, shared by both maps.
  const Tensor row_desc = mean(concat({fa, fb}, 0), 2);                     // 2C x H
  const Tensor row_w = softmax(matmul(row_proj, row_desc), 1);               // 1 x H
  auto collapse_rows = [&](const Tensor& f) {
    const Tensor by_col = reshape(transpose_last2(f), {c * w, h});           // (C*W) x H
    return reshape(matmul(by_col, transpose_last2(row_w)), {c, w});          // C x W
  };
  const Tensor ra = collapse_rows(fa);
  const Tensor rb = collapse_rows(fb);

  // Columns: scores from the concatenated row-pooled pair.
  const Tensor col_w = softmax(matmul(col_proj, concat({ra, rb}, 0)), 1);    // 1 x W
  const Tensor col_t = transpose_last2(col_w);                               // W x 1
  return GlobalAggregate{reshape(matmul(ra, col_t), {c}), reshape(matmul(rb, col_t), {c}), row_w, col_w};
}

Tensor global_loss(std::span<const Scene> batch, const ContrastiveConfig& config, const GlobalAggParams& params,
                   GlobalDiagnostics* diagnostics) {
  config.validate();
  if (batch.size() < 2) throw ContractError("global_loss needs a batch of at least two scenes");
  std::vector<Tensor> terms;
  if (diagnostics) diagnostics->pair_losses.clear();
  for (const auto& pair : kGlobalPairs) {
    std::vector<Tensor> firsts, seconds;
    for (const auto& scene : batch) {
      const auto& x = scene.get(pair[0].modality, pair[0].view);
      const auto& y = scene.get(pair[1].modality, pair[1].view);
      auto agg = aggregate_global(x.tensor, y.tensor, params);
      firsts.push_back(agg.first);
      seconds.push_back(agg.second);
    }
    terms.push_back(info_nce(stack(firsts), stack(seconds), config.tau, config.cos_eps));
    if (diagnostics) diagnostics->pair_losses.push_back(terms.back().item());
  }
  return sum(stack(terms));
}

Tensor total_loss(std::span<const Scene> batch, const ContrastiveConfig& config, const BcsaParams& bcsa_params,
                  const GlobalAggParams& global_params, CounterRng& rng, LossBreakdown* breakdown) {
  std::vector<LocalDiagnostics> local_diag;
  GlobalDiagnostics global_diag;
  const Tensor local = column_loss(batch, config, bcsa_params, rng, breakdown ? &local_diag : nullptr);
  const Tensor global = global_loss(batch, config, global_params, breakdown ? &global_diag : nullptr);
  Tensor total = add(scale(global, config.lambda_global), local);
  if (breakdown) {
    breakdown->local = local.item();
    breakdown->global = global.item();
    breakdown->total = total.item();
    breakdown->local_diagnostics = std::move(local_diag);
    breakdown->global_diagnostics = std::move(global_diag);
  }
  return total;
}

// Toy pretraining ---------------------------------------------------------------

namespace {

void similarity_gap(const std::vector<LocalDiagnostics>& diags, double& pos, double& neg) {
  double ps = 0.0, ns = 0.0;
  std::size_t pc = 0, nc = 0;
  for (const auto& d : diags) {
    const std::size_t n = d.refined_anchors.shape()[0];
    const std::size_t dim = d.refined_anchors.shape()[1];
    const auto a = d.refined_anchors.data();
    const auto b = d.refined_candidates.data();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double s = cosine_sim(a.subspan(i * dim, dim), b.subspan(j * dim, dim));
        if (i == j) {
          ps += s;
          ++pc;
        } else {
          ns += s;
          ++nc;
        }
      }
  }
  pos = pc ? ps / static_cast<double>(pc) : 0.0;
  neg = nc ? ns / static_cast<double>(nc) : 0.0;
}

}  // namespace

TrainTrace toy_pretrain(std::vector<Scene> batch, const ContrastiveConfig& config, const TrainOptions& options) {
  config.validate();
  if (options.steps == 0) throw ConfigError("toy_pretrain needs steps >= 1");
  if (batch.empty()) throw ContractError("toy_pretrain needs a non-empty batch");
  const std::size_t channels = batch.front().maps.front().channels();

  auto bcsa_params = BcsaParams::init(channels);
  auto global_params = GlobalAggParams::init(channels, options.seed);
  std::vector<Tensor> leaves = bcsa_params.tensors();
  for (const auto& t : global_params.tensors()) leaves.push_back(t);
  for (auto& scene : batch) {
    for (auto& map : scene.maps) {
      map.tensor = map.tensor.detach();
      if (options.learn_features) {
        map.tensor.set_requires_grad(true);
        leaves.push_back(map.tensor);
      }
    }
  }

  auto evaluate = [&](LossBreakdown* breakdown) {
    CounterRng rng(options.seed);
    return total_loss(batch, config, bcsa_params, global_params, rng, breakdown);
  };

  TrainTrace trace;
  trace.seed = options.seed;
  for (std::size_t step = 0; step < options.steps; ++step) {
    for (auto& leaf : leaves) leaf.zero_grad();
    Tensor loss = evaluate(nullptr);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw DivergenceError("toy_pretrain diverged at step " + std::to_string(step), step);
    }
    trace.losses.push_back(value);
    loss.backward();
    loss.release_graph();
    for (auto& leaf : leaves) {
      auto values = leaf.mutable_data();
      const auto grad = leaf.grad();
      for (std::size_t i = 0; i < values.size(); ++i) values[i] -= options.learning_rate * grad[i];
    }
  }
  LossBreakdown final_breakdown;
  const Tensor final_loss = evaluate(&final_breakdown);
  if (!std::isfinite(final_loss.item())) {
    throw DivergenceError("toy_pretrain diverged after step " + std::to_string(options.steps), options.steps);
  }
  trace.initial_loss = trace.losses.front();
  trace.final_loss = final_loss.item();
  similarity_gap(final_breakdown.local_diagnostics, trace.final_pos_sim, trace.final_neg_sim);
  return trace;
}

std::string to_json(const TrainTrace& trace) {
  nlohmann::json steps = nlohmann::json::array();
  for (std::size_t i = 0; i < trace.losses.size(); ++i) steps.push_back({{"step", i}, {"loss", trace.losses[i]}});
  const nlohmann::json j = {{"steps", steps},
                            {"initial_loss", trace.initial_loss},
                            {"final_loss", trace.final_loss},
                            {"final_pos_sim", trace.final_pos_sim},
                            {"final_neg_sim", trace.final_neg_sim},
                            {"seed", trace.seed}};
  return j.dump(2);
}

// Gradient verification -------------------------------------------------------------

namespace {

BcsaParams random_bcsa_params(std::size_t c, CounterRng& rng) {
  auto p = BcsaParams::init(c);
  for (auto& v : p.gate.mutable_data()) v = rng.normal();
  for (auto& v : p.spatial_gain.mutable_data()) v = 1.0 + 0.3 * rng.normal();
  for (auto& v : p.spatial_bias.mutable_data()) v = 0.3 * rng.normal();
  for (auto& v : p.channel_gain.mutable_data()) v = 1.0 + 0.3 * rng.normal();
  for (auto& v : p.channel_bias.mutable_data()) v = 0.3 * rng.normal();
  return p;
}

Scene random_scene(std::size_t c, std::size_t h, std::size_t w, CounterRng& rng) {
  Scene s;
  for (auto m : {Modality::image, Modality::radar})
    for (auto v : {View::bev, View::fv}) s.maps.push_back(FeatureMap::make(Tensor::randn({c, h, w}, rng), m, v));
  return s;
}

}  // namespace

std::vector<ComponentCheck> run_gradient_checks(std::uint64_t seed, const std::string& corrupt) {
  const ContrastiveConfig config;
  std::vector<ComponentCheck> results;
  auto record = [&](const std::string& name, const std::function<Tensor()>& loss, std::vector<Tensor> leaves) {
    const double factor = name == corrupt ? 1.5 : 1.0;
    auto wrapped = [&]() { return scale_gradient(loss(), factor); };
    const auto r = check_gradients(wrapped, leaves);
    results.push_back({name, r.max_relative_error, r.max_relative_error < kGradientTolerance});
  };

  {
    CounterRng rng(seed, 1);
    Tensor a = Tensor::randn({4, 6}, rng), b = Tensor::randn({4, 6}, rng);
    record("info_nce", [&] { return info_nce(a, b, config.tau); }, {a, b});
  }
  {
    CounterRng rng(seed, 2);
    Tensor f1 = Tensor::randn({5, 4}, rng), f2 = Tensor::randn({5, 4}, rng);
    auto params = random_bcsa_params(4, rng);
    const Tensor w1 = Tensor::randn({5, 4}, rng), w2 = Tensor::randn({5, 4}, rng);
    std::vector<Tensor> leaves{f1, f2};
    for (const auto& p : params.tensors()) leaves.push_back(p);
    record("bcsa",
           [&] {
             auto out = bcsa(f1, f2, params);
             return add(sum(mul(out.first, w1)), sum(mul(out.second, w2)));
           },
           leaves);
  }
  {
    CounterRng rng(seed, 3);
    auto radar = FeatureMap::make(Tensor::randn({4, 6, 8}, rng), Modality::radar, View::bev);
    auto image = FeatureMap::make(Tensor::randn({4, 6, 8}, rng), Modality::image, View::bev);
    auto params = random_bcsa_params(4, rng);
    std::vector<Tensor> leaves{radar.tensor, image.tensor};
    for (const auto& p : params.tensors()) leaves.push_back(p);
    record("local_loss",
           [&] {
             CounterRng pick(seed, 30);
             return local_loss(radar, image, config, params, pick);
           },
           leaves);
  }
  {
    CounterRng rng(seed, 4);
    Tensor fa = Tensor::randn({4, 3, 3}, rng), fb = Tensor::randn({4, 3, 3}, rng);
    auto params = GlobalAggParams::init(4, seed, 0.5);
    CounterRng wrng(seed, 40);
    const Tensor w1 = Tensor::randn({4}, wrng), w2 = Tensor::randn({4}, wrng);
    record("aggregate_global",
           [&] {
             auto g = aggregate_global(fa, fb, params);
             return add(sum(mul(g.first, w1)), sum(mul(g.second, w2)));
           },
           {fa, fb, params.row_proj, params.col_proj});
  }
  {
    CounterRng rng(seed, 5);
    std::vector<Scene> batch{random_scene(4, 3, 3, rng), random_scene(4, 3, 3, rng)};
    auto params = GlobalAggParams::init(4, seed + 1, 0.5);
    std::vector<Tensor> leaves{params.row_proj, params.col_proj};
    for (const auto& s : batch)
      for (const auto& m : s.maps) leaves.push_back(m.tensor);
    record("global_loss", [&] { return global_loss(batch, config, params); }, leaves);
  }
  {
    CounterRng rng(seed, 6);
    std::vector<Scene> batch{random_scene(4, 4, 6, rng), random_scene(4, 4, 6, rng)};
    auto bp = random_bcsa_params(4, rng);
    auto gp = GlobalAggParams::init(4, seed + 2, 0.5);
    std::vector<Tensor> leaves = bp.tensors();
    leaves.push_back(gp.row_proj);
    leaves.push_back(gp.col_proj);
    for (const auto& s : batch)
      for (const auto& m : s.maps) leaves.push_back(m.tensor);
    record("total_loss",
           [&] {
             CounterRng pick(seed, 60);
             return total_loss(batch, config, bp, gp, pick);
           },
           leaves);
  }
  return results;
}

}  // namespace l2r::contrastive
