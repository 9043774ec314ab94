#include "l2r/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "json.hpp"
#include "l2r/error.hpp"
#include "l2r/io.hpp"

namespace l2r::gmm {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

double log_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLogTwoPi + std::log(var) + d * d / var);
}

double log_sum_exp(std::span<const double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double e : v) mx = std::max(mx, e);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double e : v) s += std::exp(e - mx);
  return mx + std::log(s);
}

// k-means++ seeding on the scalar data.
std::vector<double> seed_means(std::span<const double> xs, std::size_t k, CounterRng& rng) {
  std::vector<double> centers;
  centers.push_back(xs[rng.below(xs.size())]);
  std::vector<double> d2(xs.size());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (xs[i] - c) * (xs[i] - c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      centers.push_back(xs[rng.below(xs.size())]);
      continue;
    }
    double target = rng.uniform() * total;
    std::size_t pick = xs.size() - 1;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      target -= d2[i];
      if (target < 0.0 && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
    centers.push_back(xs[pick]);
  }
  return centers;
}

}  // namespace

Gmm1D::Gmm1D(std::vector<Component> components) : components_(std::move(components)) {
  if (components_.empty()) throw DomainError("a mixture needs at least one component");
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.weight >= 0.0 && c.weight <= 1.0)) throw DomainError("mixture weight outside [0, 1]");
    if (!(c.var > 0.0) || !std::isfinite(c.var)) throw DomainError("mixture variance must be positive");
    if (!std::isfinite(c.mean)) throw DomainError("mixture mean must be finite");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("mixture weights must sum to 1");
}

double Gmm1D::mean() const {
  double m = 0.0;
  for (const auto& c : components_) m += c.weight * c.mean;
  return m;
}

double Gmm1D::variance() const {
  const double m = mean();
  double v = 0.0;
  for (const auto& c : components_) v += c.weight * (c.var + (c.mean - m) * (c.mean - m));
  return v;
}

double Gmm1D::log_pdf(double x) const {
  std::vector<double> terms;
  terms.reserve(components_.size());
  for (const auto& c : components_) {
    terms.push_back(c.weight > 0.0 ? std::log(c.weight) + log_normal(x, c.mean, c.var)
                                   : -std::numeric_limits<double>::infinity());
  }
  return log_sum_exp(terms);
}

double Gmm1D::log_likelihood(std::span<const double> xs) const {
  double ll = 0.0;
  for (double x : xs) ll += log_pdf(x);
  return ll;
}

FitResult fit_em(std::span<const std::int64_t> counts, const FitOptions& options) {
  const std::size_t k = options.components;
  if (k == 0) throw DomainError("component count must be >= 1");
  if (counts.size() < k) {
    throw InsufficientDataError("need at least " + std::to_string(k) + " counts, got " +
                                std::to_string(counts.size()));
  }
  std::vector<double> xs;
  xs.reserve(counts.size());
  for (auto c : counts) {
    if (c <= 0) throw DomainError("point counts must be positive, got " + std::to_string(c));
    xs.push_back(static_cast<double>(c));
  }
  const std::size_t n = xs.size();
  const double nd = static_cast<double>(n);

  double mean_all = 0.0;
  for (double x : xs) mean_all += x;
  mean_all /= nd;
  double var_all = 0.0;
  for (double x : xs) var_all += (x - mean_all) * (x - mean_all);
  var_all = std::max(var_all / nd, options.var_floor);

  CounterRng rng(options.seed);
  std::vector<Component> comps;
  for (double c : seed_means(xs, k, rng)) comps.push_back({1.0 / static_cast<double>(k), c, var_all});

  FitResult result{Gmm1D(comps), {}, {}, 0, false};
  std::vector<double> resp(n * k);
  std::vector<double> terms(k);

  // Returns the log-likelihood of `comps` and fills responsibilities.
  auto e_step = [&]() {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        terms[j] = comps[j].weight > 0.0 ? std::log(comps[j].weight) + log_normal(xs[i], comps[j].mean, comps[j].var)
                                         : -std::numeric_limits<double>::infinity();
      }
      const double lse = log_sum_exp(terms);
      ll += lse;
      for (std::size_t j = 0; j < k; ++j) resp[i * k + j] = std::exp(terms[j] - lse);
    }
    return ll;
  };

  double ll = e_step();
  result.log_likelihood_trace.push_back(ll);
  for (std::size_t it = 0; it < options.max_iter; ++it) {
    // M-step
    double wsum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double nk = 0.0, sx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i * k + j];
        sx += resp[i * k + j] * xs[i];
      }
      comps[j].weight = nk / nd;
      if (nk > 0.0) {
        const double mu = sx / nk;
        double sv = 0.0;
        for (std::size_t i = 0; i < n; ++i) sv += resp[i * k + j] * (xs[i] - mu) * (xs[i] - mu);
        comps[j].mean = mu;
        comps[j].var = std::max(sv / nk, options.var_floor);
      }
      wsum += comps[j].weight;
    }
    result.weight_sums.push_back(wsum);
    ++result.iterations;

    const double next = e_step();
    result.log_likelihood_trace.push_back(next);
    const double gain = next - ll;
    ll = next;
    if (gain < options.tol) {
      result.converged = true;
      break;
    }
  }
  // Renormalize away accumulated rounding so the model validates at 1e-9.
  double total = 0.0;
  for (const auto& c : comps) total += c.weight;
  for (auto& c : comps) c.weight /= total;
  result.model = Gmm1D(std::move(comps));
  return result;
}

std::size_t draw_component(const Gmm1D& model, CounterRng& rng) {
  const auto comps = model.components();
  double u = rng.uniform();
  for (std::size_t j = 0; j < comps.size(); ++j) {
    u -= comps[j].weight;
    if (u < 0.0) return j;
  }
  // Rounding left u marginally positive: take the last component with weight.
  for (std::size_t j = comps.size(); j-- > 0;) {
    if (comps[j].weight > 0.0) return j;
  }
  return comps.size() - 1;
}

std::int64_t sample_count(const Gmm1D& model, CounterRng& rng) {
  const auto& c = model.components()[draw_component(model, rng)];
  const double v = std::round(c.mean + std::sqrt(c.var) * rng.normal());
  if (!(v >= 2.0)) return 2;
  if (v > 1e15) return static_cast<std::int64_t>(1e15);
  return static_cast<std::int64_t>(v);
}

std::string to_json(const Gmm1D& model) {
  nlohmann::json j;
  j["components"] = nlohmann::json::array();
  for (const auto& c : model.components()) {
    j["components"].push_back({{"weight", c.weight}, {"mean", c.mean}, {"var", c.var}});
  }
  return j.dump(2) + "\n";
}

Gmm1D from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed GMM JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("components") || !j["components"].is_array()) {
    throw SchemaError("GMM JSON needs a \"components\" array");
  }
  std::vector<Component> comps;
  for (const auto& c : j["components"]) {
    for (const char* key : {"weight", "mean", "var"}) {
      if (!c.is_object() || !c.contains(key) || !c[key].is_number()) {
        throw SchemaError(std::string("GMM component missing numeric field \"") + key + "\"");
      }
    }
    comps.push_back({c["weight"].get<double>(), c["mean"].get<double>(), c["var"].get<double>()});
  }
  return Gmm1D(std::move(comps));
}

void save_gmm(const Gmm1D& model, const std::filesystem::path& path) {
  io::write_text_atomic(path, to_json(model));
}

Gmm1D load_gmm(const std::filesystem::path& path) { return from_json(io::read_text(path)); }

}  // namespace l2r::gmm
