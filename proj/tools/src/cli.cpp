#include "l2r_cli/cli.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "l2r/contrastive.hpp"
#include "l2r/error.hpp"
#include "l2r/gmm.hpp"
#include "l2r/io.hpp"
#include "l2r/metrics.hpp"
#include "l2r/sampling.hpp"
#include "l2r/synth.hpp"
#include "l2r/version.hpp"
#include "l2r_cli/run_config.hpp"
#include "l2r_cli/svg.hpp"

namespace l2r::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// A check ran to completion and failed; maps to exit code 1.
struct CheckFailure : Error {
  using Error::Error;
};

// Flags that mirror config keys are captured as text and applied after the
// config file, so the command line always wins.
struct Overrides {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  std::string config_path;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    options[key] = app->add_option(flag, values[key], help);
  }

  RunConfig resolve() const {
    RunConfig config;
    if (!config_path.empty()) apply_config_file(config, config_path);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) set_key(config, key, values.at(key));
    }
    return config;
  }
};

json report_header(const std::string& command, const RunConfig& config) {
  return {{"tool", "l2r"}, {"version", std::string(kVersion)}, {"command", command},
          {"config", json::parse(to_json(config))}};
}

const std::string& require(const std::string& value, const std::string& key) {
  if (value.empty()) throw ConfigError("missing required setting '" + key + "' (flag or config key)");
  return value;
}

void write_report(const std::string& path, const json& report) {
  io::write_text_atomic(path, report.dump(2) + "\n");
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

std::vector<std::int64_t> read_counts(const fs::path& path) {
  std::vector<std::int64_t> counts;
  std::istringstream in(io::read_text(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string_view tok(line.data() + first, last - first + 1);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError("expected an integer count in " + path.string(), line_no);
    }
    counts.push_back(v);
  }
  return counts;
}

std::vector<PointCloudFrame> frames_in(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_frame_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<PointCloudFrame> frames;
  for (std::size_t i = 0; i < files.size(); ++i) {
    auto f = read_frame(files[i]);
    frames.push_back(f.with_identity(f.frame_id(), static_cast<double>(i)));
  }
  return frames;
}

// Commands ------------------------------------------------------------------------

int synth_gen(const RunConfig& config, std::ostream& out) {
  synth::SceneSpec spec;
  spec.seed = config.sampling.seed;
  spec.n_frames = config.frames;
  spec.n_objects = config.objects;
  const fs::path dir = require(config.out, "out");
  ensure_directory(dir);
  const auto corpus = synth::gen_scene(spec);
  synth::write_corpus(corpus, synth::pretrain_batch_spec(spec.seed), dir);
  out << "wrote " << corpus.lidar.size() << " frames to " << dir.string() << "\n";
  return kOk;
}

int fit_gmm(const RunConfig& config, std::ostream& out) {
  const auto counts = read_counts(require(config.counts, "counts"));
  gmm::FitOptions options;
  options.components = config.gmm_components;
  options.seed = config.sampling.seed;
  const auto fit = gmm::fit_em(counts, options);
  gmm::save_gmm(fit.model, require(config.out, "out"));
  json report = report_header("fit-gmm", config);
  report["n_counts"] = counts.size();
  report["final_log_likelihood"] = fit.log_likelihood_trace.back();
  report["iterations"] = fit.iterations;
  report["converged"] = fit.converged;
  report["model"] = json::parse(gmm::to_json(fit.model));
  if (!config.report.empty()) write_report(config.report, report);
  out << report.dump(2) << "\n";
  return kOk;
}

int sample(const RunConfig& config, std::ostream& out) {
  const auto frames = load_frame_directory(require(config.input, "input"));
  const auto model = gmm::load_gmm(require(config.gmm, "gmm"));
  const auto sampling_config = effective_sampling(config);
  const fs::path dir = require(config.out, "out");
  ensure_directory(dir);
  sampling::NearestNeighborFlow flow;
  const auto result = sampling::l2r_pipeline(frames, model, sampling_config, flow);
  json reports = json::array();
  for (std::size_t i = 0; i < result.frames.size(); ++i) {
    write_frame_csv(result.frames[i], dir / (result.frames[i].frame_id() + ".csv"));
    reports.push_back(json::parse(sampling::to_json(result.reports[i])));
  }
  json report = report_header("sample", config);
  report["flow_estimator"] = flow.name();
  report["frames"] = reports;
  write_report(config.report.empty() ? (dir / "report.json").string() : config.report, report);
  out << "sampled " << result.frames.size() << " frames into " << dir.string() << "\n";
  return kOk;
}

int chamfer(const RunConfig& config, std::ostream& out) {
  const auto a = frames_in(require(config.a, "a"));
  const auto b = frames_in(require(config.b, "b"));
  const auto result = metrics::mean_chamfer(a, b);
  json report = report_header("chamfer", config);
  report["chamfer"] = json::parse(metrics::to_json(result));
  write_report(require(config.report, "report"), report);
  if (!config.plot.empty()) {
    std::vector<ScatterPoint> pts;
    for (std::size_t i = 0; i < result.per_frame.size(); ++i) {
      pts.push_back({static_cast<double>(i), result.per_frame[i].value, result.per_frame[i].frame_id});
    }
    io::write_text_atomic(config.plot, scatter_svg(pts, "Per-frame Chamfer distance", "frame", "Chamfer (m^2)"));
  }
  out << io::format_double(result.mean) << "\n";
  return kOk;
}

int gradcheck(const RunConfig& config, const std::string& fault, std::ostream& out) {
  const auto checks = contrastive::run_gradient_checks(config.sampling.seed, fault);
  json report = report_header("gradcheck", config);
  report["tolerance"] = contrastive::kGradientTolerance;
  json components = json::array();
  std::vector<std::string> failed;
  for (const auto& c : checks) {
    char line[128];
    std::snprintf(line, sizeof line, "%-18s max_rel_err=%.3e %s\n", c.name.c_str(), c.max_relative_error,
                  c.passed ? "ok" : "FAIL");
    out << line;
    components.push_back({{"name", c.name}, {"max_relative_error", c.max_relative_error}, {"passed", c.passed}});
    if (!c.passed) failed.push_back(c.name);
  }
  report["components"] = components;
  report["passed"] = failed.empty();
  if (!config.report.empty()) write_report(config.report, report);
  if (!failed.empty()) {
    std::string names;
    for (const auto& n : failed) names += (names.empty() ? "" : ", ") + n;
    throw CheckFailure("gradient check failed for: " + names);
  }
  return kOk;
}

int pretrain_toy(const RunConfig& config, std::ostream& out) {
  const auto corpus = synth::read_corpus(require(config.corpus, "corpus"));
  if (!corpus.features) throw SchemaError("corpus manifest has no feature_batch entry");
  const auto batch = synth::gen_feature_batch(*corpus.features);
  contrastive::TrainOptions options;
  options.steps = config.steps;
  options.learning_rate = config.learning_rate;
  options.seed = config.sampling.seed;
  const auto trace = contrastive::toy_pretrain(batch.scenes, config.contrastive, options);
  json report = report_header("pretrain-toy", config);
  for (const auto& [k, v] : json::parse(contrastive::to_json(trace)).items()) report[k] = v;
  write_report(require(config.report, "report"), report);
  out << "initial_loss " << io::format_double(trace.initial_loss) << "\nfinal_loss "
      << io::format_double(trace.final_loss) << "\n";
  if (!(trace.final_loss < trace.initial_loss)) throw CheckFailure("final loss did not improve on the initial loss");
  return kOk;
}

}  // namespace

std::vector<PointCloudFrame> load_frame_directory(const fs::path& dir) {
  if (fs::exists(dir / "manifest.json")) return synth::read_corpus(dir).lidar;
  return frames_in(dir);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"LiDAR-to-radar sampling, Chamfer evaluation and contrastive loss checks", "l2r"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::map<std::string, Overrides> overrides;
  auto command = [&](const std::string& name, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    auto& o = overrides[name];
    sub->add_option("--config", o.config_path, "key = value run configuration file");
    return std::pair<CLI::App*, Overrides*>{sub, &o};
  };

  auto [gen, gen_o] = command("synth-gen", "write a deterministic synthetic corpus");
  gen_o->add(gen, "--seed", "seed", "random seed");
  gen_o->add(gen, "--frames", "frames", "number of frames");
  gen_o->add(gen, "--objects", "objects", "number of moving objects");
  gen_o->add(gen, "--out", "out", "output directory");

  auto [fit, fit_o] = command("fit-gmm", "fit the per-frame count model");
  fit_o->add(fit, "--counts", "counts", "file with one positive count per line");
  fit_o->add(fit, "--components", "gmm_components", "mixture components K");
  fit_o->add(fit, "--seed", "seed", "seed for k-means++ initialization");
  fit_o->add(fit, "--out", "out", "model JSON destination");
  fit_o->add(fit, "--report", "report", "fit report destination");

  auto [smp, smp_o] = command("sample", "convert LiDAR frames into pseudo-radar frames");
  smp_o->add(smp, "--input", "input", "corpus or frame directory");
  smp_o->add(smp, "--gmm", "gmm", "count model JSON");
  smp_o->add(smp, "--seed", "seed", "random seed");
  smp_o->add(smp, "--out", "out", "output directory");
  smp_o->add(smp, "--report", "report", "report destination (default OUT/report.json)");
  smp_o->add(smp, "--ablate-weights", "ablate_weights", "keep one weight family: int|dist|spa|none");
  smp_o->options["ablate_weights"]->check(CLI::IsMember({"int", "dist", "spa", "none"}));

  auto [chm, chm_o] = command("chamfer", "mean Chamfer distance between two frame directories");
  chm_o->add(chm, "--a", "a", "first frame directory");
  chm_o->add(chm, "--b", "b", "second frame directory");
  chm_o->add(chm, "--report", "report", "report destination");
  chm_o->add(chm, "--plot", "plot", "optional SVG of per-frame values");

  std::string fault;
  auto [grd, grd_o] = command("gradcheck", "finite-difference checks of every loss component");
  grd_o->add(grd, "--seed", "seed", "random seed");
  grd_o->add(grd, "--report", "report", "optional report destination");
  grd->add_option("--inject-fault", fault)->group("");

  auto [toy, toy_o] = command("pretrain-toy", "gradient-descent pretraining on a planted feature batch");
  toy_o->add(toy, "--corpus", "corpus", "corpus directory with a manifest");
  toy_o->add(toy, "--steps", "steps", "gradient steps");
  toy_o->add(toy, "--lr", "learning_rate", "learning rate");
  toy_o->add(toy, "--seed", "seed", "random seed");
  toy_o->add(toy, "--report", "report", "trace report destination");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    const RunConfig config = overrides.at(name).resolve();
    if (name == "synth-gen") return synth_gen(config, out);
    if (name == "fit-gmm") return fit_gmm(config, out);
    if (name == "sample") return sample(config, out);
    if (name == "chamfer") return chamfer(config, out);
    if (name == "gradcheck") return gradcheck(config, fault, out);
    return pretrain_toy(config, out);
  } catch (const CheckFailure& e) {
    err << "check failed: " << e.what() << "\n";
    return kCheckFailed;
  } catch (const contrastive::DivergenceError& e) {
    err << "diverged at step " << e.step() << ": " << e.what() << "\n";
    return kCheckFailed;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace l2r::cli
