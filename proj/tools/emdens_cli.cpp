// emdens: embed multiplex images with a deep sparse autoencoder, estimate the
// cluster count from density outliers in the binned embedding, cluster, and
// report. Subcommands: synth, train, embed, estimate-k, cluster, pipeline,
// benchmark.

#include "emdens/autoencoder.hpp"
#include "emdens/clustering.hpp"
#include "emdens/data_io.hpp"
#include "emdens/density_k.hpp"
#include "emdens/evaluation.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace emdens;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

MatrixFormat parse_format(const std::string& fmt) {
  if (fmt == "csv") return MatrixFormat::Csv;
  if (fmt == "f32") return MatrixFormat::RawF32;
  throw CLI::ValidationError("--format must be csv or f32");
}

MatrixFormat format_for(const std::string& path, const std::string& fmt) {
  if (!fmt.empty()) return parse_format(fmt);
  return fs::path(path).extension() == ".f32" ? MatrixFormat::RawF32 : MatrixFormat::Csv;
}

std::vector<int> parse_layer_sizes(const std::string& text) {
  std::vector<int> sizes;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ','))
    sizes.push_back(std::stoi(tok));
  if (sizes.empty()) throw CLI::ValidationError("--layers must list at least one size");
  return sizes;
}

int worker_cap() {
  if (const char* env = std::getenv("EMDENS_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct CommonTrainFlags {
  std::string layers = "15,10,3";
  double alpha = 1e-4;
  double beta = 100.0;
  double gamma = 0.5;
  int max_epochs = 10000;
  std::uint64_t seed = 0;
  bool fine_tune = false;
};

void add_train_flags(CLI::App* cmd, CommonTrainFlags& f) {
  cmd->add_option("--layers", f.layers, "Hidden layer sizes, comma separated");
  cmd->add_option("--alpha", f.alpha, "L2 coefficient");
  cmd->add_option("--beta", f.beta, "Sparsity coefficient");
  cmd->add_option("--gamma", f.gamma, "Target mean activation");
  cmd->add_option("--max-epochs", f.max_epochs, "SCG iteration cap per stage");
  cmd->add_option("--seed", f.seed, "RNG seed");
  cmd->add_flag("--fine-tune", f.fine_tune, "Joint end-to-end pass after stacking");
}

DsaModel do_train(const MultiplexImage& img, const CommonTrainFlags& f,
                  const std::string& log_path) {
  auto [norm, spec] = normalize(img);
  const auto sizes = parse_layer_sizes(f.layers);
  std::vector<SparseAeHyper> hypers(
      sizes.size(),
      SparseAeHyper{.alpha = f.alpha, .beta = f.beta, .gamma = f.gamma,
                    .max_epochs = f.max_epochs});
  TrainOptions opts;
  opts.seed = f.seed;
  opts.fine_tune = f.fine_tune;
  TrainLog log;
  DsaModel model = train_stacked(norm.data, sizes, hypers, opts, &log);
  model.norm = spec;
  if (!log_path.empty()) {
    std::ofstream out(log_path);
    out << "stage,iteration,cost\n";
    out.precision(17);
    for (std::size_t s = 0; s < log.stage_costs.size(); ++s)
      for (std::size_t i = 0; i < log.stage_costs[s].size(); ++i)
        out << s + 1 << ',' << i << ',' << log.stage_costs[s][i] << '\n';
  }
  return model;
}

void write_embedding_csv(const Matrix& z, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out.precision(17);
  for (Eigen::Index r = 0; r < z.rows(); ++r)
    out << z(r, 0) << ',' << z(r, 1) << ',' << z(r, 2) << '\n';
}

struct PipelineFlags {
  std::string model_path;
  std::string out_dir = ".";
  int bins = 10;
  double percentile_floor = 20.0;
  int restarts = 5;
  int silhouette_subsample = 10000;
  std::uint64_t seed = 0;
  bool train = false;
  CommonTrainFlags train_flags;
};

// One dataset through encode -> histogram -> estimate_k -> kmeans -> silhouette.
// Returns false when the embedding is homogeneous (reported, clustering skipped).
bool run_pipeline_one(const std::string& input, MatrixFormat fmt, const DsaModel& model,
                      const PipelineFlags& flags, double training_s) {
  const auto t_start = std::chrono::steady_clock::now();
  MultiplexImage img = load_matrix(input, fmt);
  const std::string stem = fs::path(input).stem().string();
  const fs::path dir(flags.out_dir);
  fs::create_directories(dir);

  SummaryReport rep;
  rep.dataset = stem;
  rep.n_pixels = img.pixels();
  rep.channels = img.channels;
  rep.timings.training_s = training_s;

  auto t0 = std::chrono::steady_clock::now();
  Matrix z = encode(model, apply_normalization(model.norm, img.data));
  rep.timings.embedding_s = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  DensityHistogram hist = histogram(z, flags.bins);
  rep.timings.density_s = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  rep.k_estimate = estimate_k(hist, flags.percentile_floor);
  rep.timings.outlier_s = seconds_since(t0);
  rep.diagnostics = dense_region_check(hist);

  write_ppm(pseudo_rgb(z, img.height, img.width), img.height, img.width,
            (dir / (stem + "_rgb.ppm")).string());
  export_histogram_csv(hist, (dir / (stem + "_hist.csv")).string());

  bool clustered = false;
  if (!rep.k_estimate.homogeneous && rep.k_estimate.k >= 1) {
    t0 = std::chrono::steady_clock::now();
    ClusterResult cl = kmeans(z, rep.k_estimate.k,
                              {.restarts = flags.restarts, .seed = flags.seed});
    rep.timings.clustering_s = seconds_since(t0);
    ClusterMapImages maps = cluster_map(cl.labels, rep.k_estimate.k, img.height, img.width);
    write_ppm(maps.rgb, img.height, img.width, (dir / (stem + "_clusters.ppm")).string());
    write_pgm(maps.labels, img.height, img.width, (dir / (stem + "_labels.pgm")).string());
    if (rep.k_estimate.k >= 2)
      rep.silhouette = silhouette(z, cl.labels, flags.silhouette_subsample, flags.seed);
    CorrelationMatrix cm = correlate_maps(cl.labels, rep.k_estimate.k, img);
    std::ofstream corr((dir / (stem + "_correlation.csv")).string());
    corr << "cluster,channel,phi,defined\n";
    corr.precision(17);
    for (int c = 0; c < rep.k_estimate.k; ++c)
      for (int ch = 0; ch < img.channels; ++ch)
        corr << c << ',' << ch << ',' << cm.values(c, ch) << ','
             << (cm.defined[c][ch] ? 1 : 0) << '\n';
    clustered = true;
  }
  rep.timings.total_s = seconds_since(t_start);
  write_summary_report(rep, (dir / (stem + "_report.json")).string());
  if (!clustered)
    std::cerr << "warning: homogeneous embedding for " << stem
              << "; clustering skipped\n";
  return clustered;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Density-outlier cluster-number estimation for multiplex images"};
  app.require_subcommand(1);

  // --- synth ---
  auto* synth = app.add_subcommand("synth", "Generate labelled Gaussian blob data");
  BlobSpec blob;
  std::string synth_out, synth_fmt = "csv";
  synth->add_option("--clusters", blob.n_clusters, "Number of blobs");
  synth->add_option("--points-per-cluster", blob.points_per_cluster, "Points per blob");
  synth->add_option("--channels", blob.channels, "Channel count D");
  synth->add_option("--separation", blob.mean_separation, "Min mean distance (units of sigma)");
  synth->add_option("--sigma", blob.noise_sigma, "Noise standard deviation");
  synth->add_option("--seed", blob.seed, "RNG seed");
  synth->add_option("--out", synth_out, "Output stem (.csv/.f32 + .meta)")->required();
  synth->add_option("--format", synth_fmt, "csv or f32");

  // --- train ---
  auto* train = app.add_subcommand("train", "Train a stacked sparse autoencoder");
  std::string train_input, train_fmt, train_model = "model.dsa", train_log;
  CommonTrainFlags tf;
  train->add_option("--input", train_input, "Training data file")->required();
  train->add_option("--format", train_fmt, "csv or f32 (default from extension)");
  train->add_option("--model", train_model, "Output model path");
  train->add_option("--log", train_log, "Training cost log CSV");
  add_train_flags(train, tf);

  // --- embed ---
  auto* embed_cmd = app.add_subcommand("embed", "Apply a trained encoder to data");
  std::string em_input, em_fmt, em_model, em_out = "embedding.csv", em_rgb;
  embed_cmd->add_option("--input", em_input, "Data file")->required();
  embed_cmd->add_option("--format", em_fmt, "csv or f32");
  embed_cmd->add_option("--model", em_model, "Trained model")->required();
  embed_cmd->add_option("--out", em_out, "Embedding CSV output");
  embed_cmd->add_option("--rgb", em_rgb, "Optional pseudo-RGB PPM output");

  // --- estimate-k ---
  auto* estk = app.add_subcommand("estimate-k", "Estimate cluster count from density outliers");
  std::string ek_input, ek_fmt, ek_model, ek_out = "k_estimate.json", ek_hist;
  int ek_bins = 10;
  double ek_floor = 20.0;
  estk->add_option("--input", ek_input, "Data file")->required();
  estk->add_option("--format", ek_fmt, "csv or f32");
  estk->add_option("--model", ek_model, "Trained model")->required();
  estk->add_option("--bins", ek_bins, "Bins per dimension");
  estk->add_option("--percentile-floor", ek_floor, "Outlier-bin percentile filter");
  estk->add_option("--out", ek_out, "Report JSON path");
  estk->add_option("--hist", ek_hist, "Optional histogram CSV path");

  // --- cluster ---
  auto* clus = app.add_subcommand("cluster", "k-means over the embedding");
  std::string cl_input, cl_fmt, cl_model, cl_outdir = ".";
  int cl_k = 0, cl_restarts = 5, cl_subsample = 10000;
  std::uint64_t cl_seed = 0;
  clus->add_option("--input", cl_input, "Data file")->required();
  clus->add_option("--format", cl_fmt, "csv or f32");
  clus->add_option("--model", cl_model, "Trained model")->required();
  clus->add_option("--k", cl_k, "Cluster count (0 = estimate via density outliers)");
  clus->add_option("--restarts", cl_restarts, "k-means restarts");
  clus->add_option("--silhouette-subsample", cl_subsample, "Silhouette sample size");
  clus->add_option("--seed", cl_seed, "RNG seed");
  clus->add_option("--outdir", cl_outdir, "Output directory");

  // --- pipeline ---
  auto* pipe = app.add_subcommand("pipeline", "Full embed/estimate/cluster/report run");
  PipelineFlags pf;
  std::string pipe_input, pipe_manifest, pipe_fmt;
  pipe->add_option("--input", pipe_input, "Data file");
  pipe->add_option("--manifest", pipe_manifest, "Text file listing data files (batch mode)");
  pipe->add_option("--format", pipe_fmt, "csv or f32");
  pipe->add_option("--model", pf.model_path, "Trained model");
  pipe->add_flag("--train", pf.train, "Train on the (first) input instead of loading");
  pipe->add_option("--outdir", pf.out_dir, "Output directory");
  pipe->add_option("--bins", pf.bins, "Bins per dimension");
  pipe->add_option("--percentile-floor", pf.percentile_floor, "Outlier percentile filter");
  pipe->add_option("--restarts", pf.restarts, "k-means restarts");
  pipe->add_option("--silhouette-subsample", pf.silhouette_subsample, "Silhouette sample");
  add_train_flags(pipe, pf.train_flags);  // --seed here covers the whole run

  // --- benchmark ---
  auto* bench = app.add_subcommand("benchmark", "Density path vs SSD-sweep timing");
  std::string bn_input, bn_fmt, bn_model, bn_out = "benchmark.json";
  int bn_kmax = 30, bn_subsample = 50000, bn_bins = 10;
  double bn_tolerance = 0.005;
  std::uint64_t bn_seed = 0;
  bench->add_option("--input", bn_input, "Data file")->required();
  bench->add_option("--format", bn_fmt, "csv or f32");
  bench->add_option("--model", bn_model, "Trained model")->required();
  bench->add_option("--k-max", bn_kmax, "Sweep upper bound");
  bench->add_option("--subsample", bn_subsample, "SSD sweep subsample size");
  bench->add_option("--bins", bn_bins, "Bins per dimension");
  bench->add_option("--tolerance", bn_tolerance, "Inflection tolerance");
  bench->add_option("--seed", bn_seed, "RNG seed");
  bench->add_option("--out", bn_out, "Timing report JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) {
      auto [img, labels] = synth_blobs(blob);
      const MatrixFormat fmt = parse_format(synth_fmt);
      const std::string data_path =
          synth_out + (fmt == MatrixFormat::Csv ? ".csv" : ".f32");
      save_matrix(img, data_path, fmt);
      std::ofstream lab(synth_out + "_labels.csv");
      for (int l : labels) lab << l << '\n';
      std::cout << "wrote " << data_path << " (" << img.pixels() << " points, "
                << img.channels << " channels)\n";
    } else if (*train) {
      const auto t0 = std::chrono::steady_clock::now();
      MultiplexImage img = load_matrix(train_input, format_for(train_input, train_fmt));
      DsaModel model = do_train(img, tf, train_log);
      save_model(model, train_model);
      std::cout << "trained " << tf.layers << " model in " << seconds_since(t0)
                << " s -> " << train_model << "\n";
    } else if (*embed_cmd) {
      MultiplexImage img = load_matrix(em_input, format_for(em_input, em_fmt));
      DsaModel model = load_model(em_model);
      Matrix z = encode(model, apply_normalization(model.norm, img.data));
      write_embedding_csv(z, em_out);
      if (!em_rgb.empty())
        write_ppm(pseudo_rgb(z, img.height, img.width), img.height, img.width, em_rgb);
      std::cout << "embedded " << z.rows() << " points -> " << em_out << "\n";
    } else if (*estk) {
      MultiplexImage img = load_matrix(ek_input, format_for(ek_input, ek_fmt));
      DsaModel model = load_model(ek_model);
      Matrix z = encode(model, apply_normalization(model.norm, img.data));
      DensityHistogram hist = histogram(z, ek_bins);
      KEstimate est = estimate_k(hist, ek_floor);
      export_k_estimate_json(est, ek_out);
      if (!ek_hist.empty()) export_histogram_csv(hist, ek_hist);
      if (est.homogeneous)
        std::cout << "homogeneous embedding; no density outliers\n";
      else
        std::cout << "estimated k = " << est.k << "\n";
    } else if (*clus) {
      MultiplexImage img = load_matrix(cl_input, format_for(cl_input, cl_fmt));
      DsaModel model = load_model(cl_model);
      Matrix z = encode(model, apply_normalization(model.norm, img.data));
      int k = cl_k;
      if (k == 0) {
        KEstimate est = estimate_k(histogram(z, 10));
        if (est.homogeneous) {
          std::cerr << "warning: homogeneous embedding; nothing to cluster\n";
          return 0;
        }
        k = est.k;
      }
      ClusterResult cl_res = kmeans(z, k, {.restarts = cl_restarts, .seed = cl_seed});
      fs::create_directories(cl_outdir);
      const std::string stem = fs::path(cl_input).stem().string();
      ClusterMapImages maps = cluster_map(cl_res.labels, k, img.height, img.width);
      write_ppm(maps.rgb, img.height, img.width,
                (fs::path(cl_outdir) / (stem + "_clusters.ppm")).string());
      write_pgm(maps.labels, img.height, img.width,
                (fs::path(cl_outdir) / (stem + "_labels.pgm")).string());
      std::cout << "k = " << k << ", total SSD = " << cl_res.total_ssd << "\n";
      if (k >= 2) {
        SilhouetteStats st = silhouette(z, cl_res.labels, cl_subsample, cl_seed);
        std::cout << "silhouette median " << st.median << " +/- " << st.mad
                  << " (MAD), mean " << st.mean << " +/- " << st.stderr_mean
                  << " (stderr)\n";
      }
    } else if (*pipe) {
      pf.seed = pf.train_flags.seed;
      std::vector<std::string> inputs;
      if (!pipe_manifest.empty()) {
        std::ifstream mf(pipe_manifest);
        if (!mf) throw DataError("cannot open manifest " + pipe_manifest);
        std::string line;
        while (std::getline(mf, line))
          if (!line.empty()) inputs.push_back(line);
      }
      if (!pipe_input.empty()) inputs.insert(inputs.begin(), pipe_input);
      if (inputs.empty())
        throw CLI::ValidationError("pipeline needs --input or --manifest");

      DsaModel model;
      double training_s = 0.0;
      if (pf.train) {
        const auto t0 = std::chrono::steady_clock::now();
        MultiplexImage img =
            load_matrix(inputs.front(), format_for(inputs.front(), pipe_fmt));
        model = do_train(img, pf.train_flags, "");
        training_s = seconds_since(t0);
        if (!pf.model_path.empty()) save_model(model, pf.model_path);
      } else {
        if (pf.model_path.empty())
          throw CLI::ValidationError("pipeline needs --model or --train");
        model = load_model(pf.model_path);
      }

      const double amortized = training_s / static_cast<double>(inputs.size());
      std::atomic<std::size_t> next{0};
      std::atomic<bool> failed{false};
      std::mutex err_mutex;
      std::string first_error;
      auto work = [&] {
        for (std::size_t i = next++; i < inputs.size(); i = next++) {
          try {
            run_pipeline_one(inputs[i], format_for(inputs[i], pipe_fmt), model, pf,
                             amortized);
          } catch (const std::exception& e) {
            std::lock_guard lock(err_mutex);
            if (!failed.exchange(true)) first_error = e.what();
          }
        }
      };
      const int workers =
          std::min<int>(worker_cap(), static_cast<int>(inputs.size()));
      std::vector<std::thread> pool;
      for (int w = 1; w < workers; ++w) pool.emplace_back(work);
      work();
      for (auto& t : pool) t.join();
      if (failed) throw DataError(first_error);
      std::cout << "processed " << inputs.size() << " dataset(s) -> " << pf.out_dir
                << "\n";
    } else if (*bench) {
      MultiplexImage img = load_matrix(bn_input, format_for(bn_input, bn_fmt));
      DsaModel model = load_model(bn_model);

      auto t0 = std::chrono::steady_clock::now();
      Matrix z = encode(model, apply_normalization(model.norm, img.data));
      const double embed_s = seconds_since(t0);
      t0 = std::chrono::steady_clock::now();
      DensityHistogram hist = histogram(z, bn_bins);
      const double density_s = seconds_since(t0);
      t0 = std::chrono::steady_clock::now();
      KEstimate est = estimate_k(hist);
      const double outlier_s = seconds_since(t0);
      const double density_total = embed_s + density_s + outlier_s;

      t0 = std::chrono::steady_clock::now();
      SsdCurve curve = ssd_sweep(z, bn_kmax, bn_subsample, bn_seed);
      auto infl = inflection_k(curve, bn_tolerance, InflectionMode::Tolerance);
      const double sweep_s = seconds_since(t0);

      json j;
      j["n_pixels"] = img.pixels();
      j["density_path"] = {{"embedding_s", embed_s},
                           {"density_estimation_s", density_s},
                           {"outlier_detection_s", outlier_s},
                           {"total_s", density_total},
                           {"k", est.homogeneous ? 0 : est.k}};
      j["ssd_path"] = {{"sweep_s", sweep_s},
                       {"k_max", bn_kmax},
                       {"k", infl ? *infl : 0}};
      j["speedup"] = sweep_s / density_total;
      std::ofstream out(bn_out);
      out << j.dump(2) << "\n";
      std::cout << "density path " << density_total << " s, SSD path " << sweep_s
                << " s, speedup " << sweep_s / density_total << "x\n";
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
