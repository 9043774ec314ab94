#include "l2r_cli/run_config.hpp"

#include <charconv>
#include <functional>

#include "json.hpp"
#include "l2r/error.hpp"
#include "l2r/io.hpp"

namespace l2r::cli {

namespace {

using nlohmann::json;

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("invalid value '" + std::string(text) + "' for key '" + std::string(key) + "'");
  }
  return value;
}

struct Entry {
  KeyDoc doc;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<json(const RunConfig&)> get;
};

template <typename T>
Entry number(KeyDoc doc, T RunConfig::*member) {
  return {doc, [doc, member](RunConfig& c, std::string_view v) { c.*member = parse_number<T>(doc.name, v); },
          [member](const RunConfig& c) { return json(c.*member); }};
}

template <typename S, typename T>
Entry nested(KeyDoc doc, S RunConfig::*outer, T S::*member) {
  return {doc,
          [doc, outer, member](RunConfig& c, std::string_view v) {
            (c.*outer).*member = parse_number<T>(doc.name, v);
          },
          [outer, member](const RunConfig& c) { return json((c.*outer).*member); }};
}

Entry text(KeyDoc doc, std::string RunConfig::*member) {
  return {doc, [member](RunConfig& c, std::string_view v) { c.*member = std::string(v); },
          [member](const RunConfig& c) { return json(c.*member); }};
}

using SC = sampling::SamplingConfig;
using CC = contrastive::ContrastiveConfig;

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    t.push_back(nested<SC, std::uint64_t>({"seed", "", "random seed shared by every stage"}, &RunConfig::sampling,
                                          &SC::seed));
    t.push_back(nested<SC, double>({"alpha_int", "", "weight of the intensity family"}, &RunConfig::sampling,
                                   &SC::alpha_int));
    t.push_back(nested<SC, double>({"alpha_dist", "", "weight of the distance family"}, &RunConfig::sampling,
                                   &SC::alpha_dist));
    t.push_back(nested<SC, double>({"alpha_spa", "", "weight of the sparsity family"}, &RunConfig::sampling,
                                   &SC::alpha_spa));
    t.push_back(nested<SC, double>({"center_radius", "m", "stage-1 points lie farther than this from the origin"},
                                   &RunConfig::sampling, &SC::center_radius));
    t.push_back(nested<SC, double>({"d_threshold", "m", "minimum spacing kept by redundancy thinning"},
                                   &RunConfig::sampling, &SC::d_threshold));
    t.push_back(nested<SC, std::size_t>({"neighbor_count", "", "neighbors summed by the sparsity weight"},
                                        &RunConfig::sampling, &SC::neighbor_count));
    t.push_back(nested<SC, double>({"dist_epsilon", "m^2", "added to squared origin distance"},
                                   &RunConfig::sampling, &SC::dist_epsilon));
    t.push_back(text({"ablate_weights", "", "keep only one weight family: int, dist, spa or none"},
                     &RunConfig::ablate_weights));
    t.push_back(number<std::size_t>({"gmm_components", "", "mixture components for fit-gmm"},
                                    &RunConfig::gmm_components));
    t.push_back(number<std::size_t>({"frames", "", "frames generated by synth-gen"}, &RunConfig::frames));
    t.push_back(number<std::size_t>({"objects", "", "moving objects generated by synth-gen"}, &RunConfig::objects));
    t.push_back(nested<CC, double>({"tau", "", "InfoNCE temperature"}, &RunConfig::contrastive, &CC::tau));
    t.push_back(nested<CC, std::size_t>({"search_width", "columns", "sliding-window search width R"},
                                        &RunConfig::contrastive, &CC::search_width));
    t.push_back(nested<CC, std::size_t>({"window_width", "columns", "sliding-window width r"},
                                        &RunConfig::contrastive, &CC::window_width));
    t.push_back(nested<CC, std::size_t>({"batch_n", "columns", "columns per scene in the local loss"},
                                        &RunConfig::contrastive, &CC::batch_n));
    t.push_back(nested<CC, double>({"lambda_global", "", "weight of the global loss"}, &RunConfig::contrastive,
                                   &CC::lambda_global));
    t.push_back(number<std::size_t>({"steps", "", "gradient steps for pretrain-toy"}, &RunConfig::steps));
    t.push_back(number<double>({"learning_rate", "", "gradient step size for pretrain-toy"},
                               &RunConfig::learning_rate));
    t.push_back(text({"input", "path", "LiDAR corpus or frame directory for sample"}, &RunConfig::input));
    t.push_back(text({"out", "path", "output file or directory"}, &RunConfig::out));
    t.push_back(text({"gmm", "path", "count model JSON"}, &RunConfig::gmm));
    t.push_back(text({"counts", "path", "one positive count per line"}, &RunConfig::counts));
    t.push_back(text({"corpus", "path", "synthetic corpus directory for pretrain-toy"}, &RunConfig::corpus));
    t.push_back(text({"report", "path", "JSON report destination"}, &RunConfig::report));
    t.push_back(text({"plot", "path", "SVG plot destination"}, &RunConfig::plot));
    t.push_back(text({"a", "path", "first frame directory for chamfer"}, &RunConfig::a));
    t.push_back(text({"b", "path", "second frame directory for chamfer"}, &RunConfig::b));
    return t;
  }();
  return table;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::span<const KeyDoc> run_config_keys() {
  static const std::vector<KeyDoc> docs = [] {
    std::vector<KeyDoc> d;
    for (const auto& e : entries()) d.push_back(e.doc);
    return d;
  }();
  return docs;
}

void set_key(RunConfig& config, std::string_view key, std::string_view value) {
  for (const auto& e : entries()) {
    if (e.doc.name == key) return e.set(config, value);
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void apply_config_text(RunConfig& config, std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
    try {
      set_key(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + " (line " + std::to_string(line_no) + ")");
    }
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  apply_config_text(config, io::read_text(path));
}

sampling::SamplingConfig effective_sampling(const RunConfig& config) {
  auto s = config.sampling;
  const auto& mode = config.ablate_weights;
  if (mode == "none") return s;
  if (mode != "int" && mode != "dist" && mode != "spa") {
    throw ConfigError("ablate_weights must be int, dist, spa or none, got '" + mode + "'");
  }
  if (mode != "int") s.alpha_int = 0.0;
  if (mode != "dist") s.alpha_dist = 0.0;
  if (mode != "spa") s.alpha_spa = 0.0;
  // An ablated family keeps its configured alpha, or 1 if that was zero.
  double& kept = mode == "int" ? s.alpha_int : mode == "dist" ? s.alpha_dist : s.alpha_spa;
  if (kept == 0.0) kept = 1.0;
  return s;
}

std::string to_json(const RunConfig& config) {
  json j = json::object();
  for (const auto& e : entries()) j[std::string(e.doc.name)] = e.get(config);
  return j.dump();
}

}  // namespace l2r::cli
