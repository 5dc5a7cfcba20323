#include "emdens/autoencoder.hpp"
#include "emdens/clustering.hpp"
#include "emdens/data_io.hpp"
#include "emdens/density_k.hpp"
#include "emdens/evaluation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace emdens;

PYBIND11_MODULE(_emdens, m) {
  m.doc() = "Deep sparse autoencoder embedding and density-outlier cluster-number "
            "estimation for multiplex images";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<NormalizationSpec>(m, "NormalizationSpec")
      .def_readonly("min", &NormalizationSpec::min)
      .def_readonly("max", &NormalizationSpec::max)
      .def_readonly("constant", &NormalizationSpec::constant);

  py::class_<SparseAeHyper>(m, "SparseAeHyper")
      .def(py::init([](double alpha, double beta, double gamma, int max_epochs) {
             SparseAeHyper h{alpha, beta, gamma, max_epochs};
             h.validate();
             return h;
           }),
           py::arg("alpha") = 1e-4, py::arg("beta") = 100.0, py::arg("gamma") = 0.5,
           py::arg("max_epochs") = 10000)
      .def_readwrite("alpha", &SparseAeHyper::alpha)
      .def_readwrite("beta", &SparseAeHyper::beta)
      .def_readwrite("gamma", &SparseAeHyper::gamma)
      .def_readwrite("max_epochs", &SparseAeHyper::max_epochs);

  py::class_<DsaModel>(m, "DsaModel")
      .def_property_readonly("input_dim", &DsaModel::input_dim)
      .def_property_readonly("latent_dim", &DsaModel::latent_dim)
      .def_property_readonly("norm", [](const DsaModel& mdl) { return mdl.norm; })
      .def(
          "save",
          [](const DsaModel& mdl, const std::string& path) { save_model(mdl, path); },
          py::arg("path"));

  m.def("sigmoid", py::overload_cast<const Matrix&>(&sigmoid), py::arg("x"));

  m.def(
      "synth_blobs",
      [](int n_clusters, int points_per_cluster, int channels, double mean_separation,
         double noise_sigma, double box_factor, std::uint64_t seed) {
        BlobSpec spec;
        spec.n_clusters = n_clusters;
        spec.points_per_cluster = points_per_cluster;
        spec.channels = channels;
        spec.mean_separation = mean_separation;
        spec.noise_sigma = noise_sigma;
        spec.box_factor = box_factor;
        spec.seed = seed;
        auto [img, labels] = synth_blobs(spec);
        return py::make_tuple(img.data, labels);
      },
      py::arg("n_clusters"), py::arg("points_per_cluster"), py::arg("channels"),
      py::arg("mean_separation") = 6.0, py::arg("noise_sigma") = 1.0,
      py::arg("box_factor") = BlobSpec{}.box_factor, py::arg("seed") = 0);

  m.def(
      "normalize",
      [](const Matrix& data) {
        MultiplexImage img;
        img.height = static_cast<int>(data.rows());
        img.width = 1;
        img.channels = static_cast<int>(data.cols());
        img.data = data;
        auto [norm, spec] = normalize(img);
        return py::make_tuple(norm.data, spec);
      },
      py::arg("data"));

  m.def("apply_normalization", &apply_normalization, py::arg("spec"), py::arg("data"));

  m.def(
      "train_stacked",
      [](const Matrix& x01, const std::vector<int>& hidden_sizes, double alpha,
         double beta, double gamma, int max_epochs, std::uint64_t seed, bool fine_tune,
         const NormalizationSpec* norm) {
        std::vector<SparseAeHyper> hypers(
            hidden_sizes.size(), SparseAeHyper{alpha, beta, gamma, max_epochs});
        TrainOptions opts;
        opts.seed = seed;
        opts.fine_tune = fine_tune;
        DsaModel model = train_stacked(x01, hidden_sizes, hypers, opts);
        if (norm) {
          model.norm = *norm;
        } else {
          model.norm.min = Vector::Zero(x01.cols());
          model.norm.max = Vector::Ones(x01.cols());
          model.norm.constant.assign(x01.cols(), false);
        }
        return model;
      },
      py::arg("x01"), py::arg("hidden_sizes"), py::arg("alpha") = 1e-4,
      py::arg("beta") = 100.0, py::arg("gamma") = 0.5, py::arg("max_epochs") = 10000,
      py::arg("seed") = 0, py::arg("fine_tune") = false, py::arg("norm") = nullptr);

  m.def("encode", &encode, py::arg("model"), py::arg("x01"));
  m.def("decode", &decode, py::arg("model"), py::arg("z"));
  m.def("reconstruction_mse", &reconstruction_mse, py::arg("x"), py::arg("x_prime"));
  m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
  m.def("load_model", &load_model, py::arg("path"));

  m.def(
      "histogram",
      [](const Matrix& z, int bins) {
        DensityHistogram h = histogram(z, bins);
        py::array_t<std::int64_t> counts({bins, bins, bins});
        std::copy(h.counts.begin(), h.counts.end(), counts.mutable_data());
        return counts;
      },
      py::arg("embedding"), py::arg("bins") = 10);

  m.def(
      "estimate_k",
      [](py::array_t<std::int64_t, py::array::c_style | py::array::forcecast> counts,
         double percentile_floor) {
        if (counts.ndim() != 3 || counts.shape(0) != counts.shape(1) ||
            counts.shape(1) != counts.shape(2))
          throw DataError("counts must be a cube-shaped array");
        DensityHistogram h;
        h.bins_per_dim = static_cast<int>(counts.shape(0));
        h.counts.assign(counts.data(), counts.data() + counts.size());
        KEstimate est = estimate_k(h, percentile_floor);
        py::dict d;
        d["k"] = est.k;
        d["homogeneous"] = est.homogeneous;
        d["q1"] = est.q1;
        d["q3"] = est.q3;
        d["threshold"] = est.threshold;
        d["percentile_cut"] = est.percentile_cut;
        py::list bins;
        for (const auto& o : est.outlier_bins)
          bins.append(py::make_tuple(o.first[0], o.first[1], o.first[2], o.second));
        d["outlier_bins"] = bins;
        return d;
      },
      py::arg("counts"), py::arg("percentile_floor") = 20.0);

  m.def(
      "kmeans",
      [](const Matrix& points, int k, int max_iters, int restarts, std::uint64_t seed) {
        ClusterResult res = kmeans(points, k, {max_iters, restarts, seed});
        py::dict d;
        d["labels"] = res.labels;
        d["centroids"] = res.centroids;
        d["total_ssd"] = res.total_ssd;
        d["iterations"] = res.iterations;
        return d;
      },
      py::arg("points"), py::arg("k"), py::arg("max_iters") = 300,
      py::arg("restarts") = 5, py::arg("seed") = 0);

  m.def(
      "silhouette",
      [](const Matrix& points, const std::vector<int>& labels, int subsample,
         std::uint64_t seed) {
        SilhouetteStats st = silhouette(points, labels, subsample, seed);
        py::dict d;
        d["median"] = st.median;
        d["mad"] = st.mad;
        d["mean"] = st.mean;
        d["stderr"] = st.stderr_mean;
        d["sample_size"] = st.sample_size;
        return d;
      },
      py::arg("points"), py::arg("labels"), py::arg("subsample_size") = 10000,
      py::arg("seed") = 0);

  m.def(
      "ssd_sweep",
      [](const Matrix& points, int k_max, int subsample, std::uint64_t seed) {
        SsdCurve c = ssd_sweep(points, k_max, subsample, seed);
        py::dict d;
        d["k"] = c.k_values;
        d["scaled_ssd"] = c.scaled_ssd;
        d["raw_ssd"] = c.raw_ssd;
        return d;
      },
      py::arg("points"), py::arg("k_max") = 30, py::arg("subsample_size") = 50000,
      py::arg("seed") = 0);

  m.def(
      "inflection_k",
      [](const std::vector<double>& scaled_ssd, double tolerance, const std::string& mode) {
        SsdCurve c;
        c.scaled_ssd = scaled_ssd;
        for (int k = 1; k <= static_cast<int>(scaled_ssd.size()); ++k)
          c.k_values.push_back(k);
        const auto m_ = mode == "exact" ? InflectionMode::Exact : InflectionMode::Tolerance;
        auto res = inflection_k(c, tolerance, m_);
        return res ? py::object(py::int_(*res)) : py::object(py::none());
      },
      py::arg("scaled_ssd"), py::arg("tolerance") = 0.005, py::arg("mode") = "tolerance");

  m.def(
      "pseudo_rgb",
      [](const Matrix& z, int height, int width) {
        auto bytes = pseudo_rgb(z, height, width);
        py::array_t<std::uint8_t> out({height, width, 3});
        std::copy(bytes.begin(), bytes.end(), out.mutable_data());
        return out;
      },
      py::arg("embedding"), py::arg("height"), py::arg("width"));
}
