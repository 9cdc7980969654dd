// lpknn: segment, evaluate, optimize and serve from the command line.
//
// Exit codes: 0 success, 1 unexpected failure, 2 undecodable input (image or
// trimap), 3 dimension mismatch, 4 invalid parameters or usage.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lpknn/error.hpp"
#include "lpknn/features.hpp"
#include "lpknn/image.hpp"
#include "lpknn/optimizer.hpp"
#include "lpknn/pipeline.hpp"
#include "lpknn/report.hpp"
#include "lpknn/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lpknn;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kDecode = 2, kDimension = 3, kParams = 4 };

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DecodeError*>(&e)) return kDecode;
  if (dynamic_cast<const DimensionError*>(&e)) return kDimension;
  if (dynamic_cast<const ParamError*>(&e)) return kParams;
  return kFailure;
}

// An existing file is read as a weights file; anything else is parsed as an
// inline list.
FeatureWeights load_lambda(const std::string& arg) {
  std::error_code ec;
  if (fs::is_regular_file(arg, ec)) return read_weights_file(arg);
  return parse_weights(arg);
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

// ---- segment ---------------------------------------------------------------

struct SegmentArgs {
  std::string image;
  std::string trimap;
  std::string gt;
  std::string params;
  std::optional<int> k;
  std::string lambda;
  std::string out;
  std::string report;
  std::string trace;
  int jobs = 1;
};

SegParams resolve_params(const std::string& params_file, std::optional<int> k,
                         const std::string& lambda) {
  SegParams p = params_file.empty() ? SegParams{} : read_params_file(params_file);
  if (k) p.k = *k;
  if (!lambda.empty()) p.lambda = load_lambda(lambda);
  p.validate();
  return p;
}

int run_segment(const SegmentArgs& a) {
  const SegParams params = resolve_params(a.params, a.k, a.lambda);
  const RgbImage image = read_rgb(a.image);
  const SeedMap seeds = decode_trimap(read_gray(a.trimap));

  SegmentOptions options;
  options.workers = a.jobs;
  std::ostringstream trace;
  trace << "iteration,statistic\n" << std::setprecision(17);
  options.on_checkpoint = [&](const Checkpoint& cp) {
    trace << cp.iteration << ',' << cp.statistic << '\n';
  };

  const auto started = std::chrono::steady_clock::now();
  const SegmentationResult result = segment(image, seeds, params, options);
  const double ms = elapsed_ms(started);

  std::optional<double> err;
  if (!a.gt.empty()) err = error_rate(result, decode_ground_truth(read_gray(a.gt)), seeds);

  write_gray(a.out, encode_mask(result));
  if (!a.trace.empty()) write_text(a.trace, trace.str());
  const bool tuned = !a.params.empty() && [&] {
    std::ifstream in(a.params);
    const json j = json::parse(in, nullptr, false);
    return j.is_object() && j.value("oracle_tuned", false);
  }();
  if (!a.report.empty()) {
    write_text(a.report, run_report(result, params, err, ms, tuned).dump(2) + "\n");
  }

  std::cout << "iterations " << result.iterations
            << (result.converged ? " converged" : " not-converged") << ", nodes "
            << result.node_count << ", " << std::fixed << std::setprecision(1) << ms
            << " ms";
  if (err) std::cout << ", error " << std::setprecision(3) << 100.0 * *err << " %";
  std::cout << "\n";
  if (!result.isolated_pixels.empty()) {
    std::cerr << "warning: " << result.isolated_pixels.size()
              << " unlabeled pixels have no neighbors and stay undecided\n";
  }
  for (int c : result.unseeded_classes) {
    std::cerr << "warning: class " << c << " has no seed pixels\n";
  }
  return kOk;
}

// ---- evaluate --------------------------------------------------------------

struct EvaluateArgs {
  std::string manifest;
  std::optional<int> k;
  std::string lambda;
  std::string csv;
  std::string out_dir;
  int jobs = 1;
};

struct EvalRow {
  std::string id;
  std::optional<double> error;
  int iterations = 0;
  double ms = 0;
  std::string failure;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

EvalRow evaluate_entry(const json& entry, const fs::path& base, const EvaluateArgs& a) {
  EvalRow row;
  const fs::path image_path = resolve(base, entry.at("image").get<std::string>());
  row.id = entry.value("id", image_path.stem().string());

  SegParams params;
  if (entry.contains("params")) {
    const json& p = entry["params"];
    params = p.is_string() ? read_params_file(resolve(base, p.get<std::string>()))
                           : params_from_json(p);
  }
  if (a.k) params.k = *a.k;
  if (!a.lambda.empty()) params.lambda = load_lambda(a.lambda);
  params.validate();

  const RgbImage image = read_rgb(image_path);
  const SeedMap seeds =
      decode_trimap(read_gray(resolve(base, entry.at("trimap").get<std::string>())));
  const GroundTruth truth =
      decode_ground_truth(read_gray(resolve(base, entry.at("gt").get<std::string>())));
  SegmentOptions options;
  options.workers = a.jobs;
  const auto started = std::chrono::steady_clock::now();
  const SegmentationResult result = segment(image, seeds, params, options);
  row.ms = elapsed_ms(started);
  row.iterations = result.iterations;
  row.error = error_rate(result, truth, seeds);
  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    write_gray(fs::path(a.out_dir) / (row.id + ".png"), encode_mask(result));
  }
  return row;
}

int run_evaluate(const EvaluateArgs& a) {
  std::ifstream in(a.manifest);
  if (!in) throw ParamError("cannot open manifest " + a.manifest);
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw ParamError(a.manifest + ": " + e.what());
  }
  if (!manifest.is_array()) throw ParamError("manifest must be a JSON array");
  if (manifest.empty()) throw ParamError("manifest has no entries");
  const fs::path base = fs::absolute(a.manifest).parent_path();

  std::vector<EvalRow> rows;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    try {
      rows.push_back(evaluate_entry(manifest[i], base, a));
    } catch (const std::exception& e) {
      EvalRow failed;
      failed.id = manifest[i].is_object() ? manifest[i].value("id", "entry" + std::to_string(i))
                                          : "entry" + std::to_string(i);
      failed.failure = e.what();
      std::cerr << "error: " << failed.id << ": " << e.what() << "\n";
      rows.push_back(std::move(failed));
    }
  }

  std::ostringstream csv;
  csv << "id,error_percent,iterations,wall_ms\n";
  std::cout << std::left << std::setw(16) << "image" << std::right << std::setw(10)
            << "error %" << std::setw(12) << "iterations" << std::setw(12) << "wall ms"
            << "\n";
  double err_sum = 0, ms_sum = 0, it_sum = 0;
  std::size_t ok = 0;
  for (const EvalRow& r : rows) {
    std::cout << std::left << std::setw(16) << r.id << std::right;
    if (!r.error) {
      std::cout << std::setw(10) << "failed" << "\n";
      csv << r.id << ",,,\n";
      continue;
    }
    std::cout << std::fixed << std::setprecision(2) << std::setw(10) << 100.0 * *r.error
              << std::setw(12) << r.iterations << std::setprecision(1) << std::setw(12)
              << r.ms << "\n";
    csv << r.id << ',' << std::setprecision(4) << 100.0 * *r.error << ',' << r.iterations
        << ',' << std::setprecision(1) << r.ms << '\n';
    err_sum += *r.error;
    ms_sum += r.ms;
    it_sum += r.iterations;
    ++ok;
  }
  if (ok > 0) {
    const double n = static_cast<double>(ok);
    std::cout << std::left << std::setw(16) << "mean" << std::right << std::fixed
              << std::setprecision(2) << std::setw(10) << 100.0 * err_sum / n
              << std::setprecision(1) << std::setw(12) << it_sum / n << std::setw(12)
              << ms_sum / n << "\n";
  }
  if (!a.csv.empty()) write_text(a.csv, csv.str());
  return ok == rows.size() ? kOk : kFailure;
}

// ---- optimize --------------------------------------------------------------

struct OptimizeArgs {
  std::string image;
  std::string trimap;
  std::string gt;
  std::string ga_config;
  std::optional<std::uint64_t> seed;
  std::optional<int> population;
  std::optional<int> generations;
  std::string out;
  std::string history;
  int jobs = 1;
};

int run_optimize(const OptimizeArgs& a) {
  GaConfig config = a.ga_config.empty() ? GaConfig{} : read_ga_config(a.ga_config);
  if (a.seed) config.rng_seed = *a.seed;
  if (a.population) config.population_size = *a.population;
  if (a.generations) config.generations = *a.generations;
  config.workers = a.jobs;
  config.validate();

  const RgbImage image = read_rgb(a.image);
  SeedMap seeds = decode_trimap(read_gray(a.trimap));
  GroundTruth truth = decode_ground_truth(read_gray(a.gt));
  FitnessEvaluator evaluator(image, std::move(seeds), std::move(truth));
  const OptimizeResult result = optimize(evaluator, config);

  write_text(a.out, genome_to_json(result.best).dump(2) + "\n");
  if (!a.history.empty()) {
    std::ostringstream csv;
    csv << "generation,best,mean\n" << std::setprecision(17);
    for (const auto& h : result.history) {
      csv << h.generation << ',' << h.best << ',' << h.mean << '\n';
    }
    write_text(a.history, csv.str());
  }
  std::cout << "best k " << result.best.k << ", error " << std::fixed
            << std::setprecision(3) << 100.0 * result.best.fitness.value_or(1.0) << " % ("
            << result.evaluations << " distinct genomes)\n";
  const auto failures = evaluator.failures();
  if (!failures.empty()) {
    std::cerr << "warning: " << failures.size() << " genomes failed and scored 1.0\n";
  }
  return kOk;
}

// ---- serve -----------------------------------------------------------------

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  int jobs = 1;
  std::size_t max_pixels = 2'000'000;
  int idle_minutes = 30;
  std::string cors = "*";
};

HttpServer* g_server = nullptr;

void handle_signal(int) {
  if (g_server) g_server->stop();
}

int run_serve(const ServeArgs& a) {
  ServiceConfig config;
  config.workers = a.jobs;
  config.max_pixels = a.max_pixels;
  config.idle_timeout = std::chrono::minutes(a.idle_minutes);
  config.cors_origin = a.cors;
  SegService service(config);
  HttpServer server(service);
  g_server = &server;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  std::cout << "listening on http://" << a.host << ":" << a.port << std::endl;
  const bool ok = server.listen(a.host, a.port);
  g_server = nullptr;
  if (!ok) {
    std::cerr << "error: cannot listen on " << a.host << ":" << a.port << "\n";
    return kFailure;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive segmentation by label propagation on kNN graphs"};
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 ok, 1 failure, 2 undecodable input, 3 dimension mismatch, "
      "4 invalid parameters");

  SegmentArgs seg;
  auto* segment_cmd = app.add_subcommand("segment", "Segment one image from a trimap");
  segment_cmd->add_option("--image", seg.image, "Input image (PNG, BMP or JPEG)")
      ->required()
      ->check(CLI::ExistingFile);
  segment_cmd->add_option("--trimap", seg.trimap, "Trimap: 0 ignore, 64 bg, 128 unknown, 255 fg")
      ->required()
      ->check(CLI::ExistingFile);
  segment_cmd->add_option("--gt", seg.gt, "Ground truth mask, enables the error rate")
      ->check(CLI::ExistingFile);
  segment_cmd->add_option("--params", seg.params, "JSON with k and lambda (e.g. optimize output)")
      ->check(CLI::ExistingFile);
  segment_cmd->add_option("--k", seg.k, "Neighbors per node (default 10)");
  segment_cmd->add_option("--lambda", seg.lambda,
                          "23 feature weights: a file or a comma separated list");
  segment_cmd->add_option("--out", seg.out, "Output mask (.png or .bmp)")->required();
  segment_cmd->add_option("--report", seg.report, "Write a JSON run report");
  segment_cmd->add_option("--trace", seg.trace, "Write the checkpoint statistics as CSV");
  segment_cmd->add_option("--jobs", seg.jobs, "Worker threads")->check(CLI::PositiveNumber);

  EvaluateArgs eval;
  auto* evaluate_cmd = app.add_subcommand(
      "evaluate", "Segment every manifest entry and tabulate error rates");
  evaluate_cmd
      ->add_option("--manifest", eval.manifest,
                   "JSON array of {image, trimap, gt, id?, params?}; paths relative to it")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--k", eval.k, "Override k for every entry");
  evaluate_cmd->add_option("--lambda", eval.lambda, "Override lambda for every entry");
  evaluate_cmd->add_option("--csv", eval.csv, "Write the table as CSV");
  evaluate_cmd->add_option("--out-dir", eval.out_dir, "Write each mask as <id>.png here");
  evaluate_cmd->add_option("--jobs", eval.jobs, "Worker threads")->check(CLI::PositiveNumber);

  OptimizeArgs opt;
  auto* optimize_cmd =
      app.add_subcommand("optimize", "Search k and lambda with a genetic algorithm");
  optimize_cmd->add_option("--image", opt.image, "Input image")->required()->check(
      CLI::ExistingFile);
  optimize_cmd->add_option("--trimap", opt.trimap, "Trimap")->required()->check(
      CLI::ExistingFile);
  optimize_cmd->add_option("--gt", opt.gt, "Ground truth mask")->required()->check(
      CLI::ExistingFile);
  optimize_cmd->add_option("--ga-config", opt.ga_config,
                           "JSON with population_size, generations, crossover_rate, "
                           "mutation_rate, elitism, k_range, rng_seed")
      ->check(CLI::ExistingFile);
  optimize_cmd->add_option("--seed", opt.seed, "RNG seed");
  optimize_cmd->add_option("--population", opt.population, "Population size");
  optimize_cmd->add_option("--generations", opt.generations, "Generations");
  optimize_cmd->add_option("--out", opt.out, "Best genome as JSON")->required();
  optimize_cmd->add_option("--history", opt.history, "Per-generation best/mean as CSV");
  optimize_cmd->add_option("--jobs", opt.jobs, "Parallel fitness evaluations")
      ->check(CLI::PositiveNumber);

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP segmentation service");
  serve_cmd->add_option("--host", serve.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", serve.port, "Port")->capture_default_str();
  serve_cmd->add_option("--jobs", serve.jobs, "Worker threads")->check(CLI::PositiveNumber);
  serve_cmd->add_option("--max-pixels", serve.max_pixels, "Largest accepted image")
      ->capture_default_str();
  serve_cmd->add_option("--idle-minutes", serve.idle_minutes, "Session idle timeout")
      ->capture_default_str();
  serve_cmd->add_option("--cors-origin", serve.cors, "Access-Control-Allow-Origin value")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kParams;
  }

  try {
    if (*segment_cmd) return run_segment(seg);
    if (*evaluate_cmd) return run_evaluate(eval);
    if (*optimize_cmd) return run_optimize(opt);
    if (*serve_cmd) return run_serve(serve);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kFailure;
}
