#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rrnet/adversarial.hpp"
#include "rrnet/collapse.hpp"
#include "rrnet/harness.hpp"
#include "rrnet/network.hpp"
#include "rrnet/probes.hpp"

namespace py = pybind11;
using namespace rrnet;

namespace {

Network sample_net(std::size_t d, const std::vector<std::size_t>& widths, std::uint64_t seed,
                   std::uint64_t stream, InitMode mode, TiePolicy ties) {
  RngStream rng(seed, stream);
  return Network::sample(Architecture{d, widths}, mode, rng, ties);
}

py::dict report_dict(const ProbeReport& r) {
  py::dict out;
  out["name"] = r.name;
  out["parameters"] = r.parameters;
  out["columns"] = r.columns;
  out["rows"] = r.rows;
  out["bounds"] = r.bounds;
  out["statistics"] = r.statistics;
  out["violation_frequency"] = r.violation_frequency;
  return out;
}

std::vector<std::vector<int>> masks_list(const std::vector<Mask>& masks) {
  std::vector<std::vector<int>> out;
  for (const auto& m : masks) out.emplace_back(m.data(), m.data() + m.size());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Random ReLU networks: sampling, gradients, flip search, probes";
  m.attr("__version__") = version_string();

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<NonConverged>(m, "NonConverged", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<DegenerateInput>(m, "DegenerateInput", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::enum_<InitMode>(m, "InitMode")
      .value("Standard", InitMode::Standard)
      .value("DepthCollapse", InitMode::DepthCollapse);
  py::enum_<TiePolicy>(m, "TiePolicy")
      .value("RandomizedTies", TiePolicy::RandomizedTies)
      .value("TiesToOne", TiePolicy::TiesToOne)
      .value("TiesToZero", TiePolicy::TiesToZero);

  py::class_<Network>(m, "Network")
      .def_static("sample", &sample_net, py::arg("d"), py::arg("widths"), py::arg("seed"),
                  py::arg("stream") = 0, py::arg("mode") = InitMode::Standard,
                  py::arg("ties") = TiePolicy::RandomizedTies)
      .def_static("from_weights", &Network::from_weights, py::arg("weights"),
                  py::arg("mode") = InitMode::Standard, py::arg("ties") = TiePolicy::RandomizedTies,
                  py::arg("seed") = 0)
      .def_property_readonly("input_dim", [](const Network& n) { return n.arch().input_dim; })
      .def_property_readonly("hidden_widths", [](const Network& n) { return n.arch().hidden_widths; })
      .def_property_readonly("depth", &Network::depth)
      .def_property_readonly("mode", &Network::mode)
      .def_property_readonly("tie_policy", &Network::tie_policy)
      .def_property_readonly("seed", &Network::seed)
      .def_property_readonly("weights", &Network::weights)
      .def("__call__", [](const Network& n, const Vector& x) { return evaluate(n, x); })
      .def("gradient", [](const Network& n, const Vector& x) { return gradient(n, forward(n, x)); })
      .def("masks", [](const Network& n, const Vector& x) { return masks_list(forward(n, x).masks); })
      .def("grad_difference", [](const Network& n, const Vector& x, const Vector& y) {
        const GradDecomposition d = grad_difference_decomposition(n, forward(n, x), forward(n, y));
        return py::make_tuple(d.terms, d.grad_x, d.grad_y);
      })
      .def("save", [](const Network& n, const std::filesystem::path& p) { save_network(n, p); })
      .def_static("load", &load_network)
      .def("__eq__", [](const Network& a, const Network& b) { return a == b; });

  m.def("bottleneck_decomposition", [](std::size_t d, const std::vector<std::size_t>& widths) {
    return bottleneck_decomposition(Architecture{d, widths}).indices;
  });
  m.def("paper_radius", py::overload_cast<double, double, std::size_t>(&paper_radius),
        py::arg("d_min"), py::arg("d_max"), py::arg("ell"));
  m.def("spectral_norm", py::overload_cast<const Matrix&, double, std::size_t>(&spectral_norm),
        py::arg("m"), py::arg("tol") = 1e-10, py::arg("max_iters") = 10000);
  m.def("ks_two_sample", [](const std::vector<double>& a, const std::vector<double>& b) {
    return ks_two_sample(a, b);
  });

  m.def(
      "flip_search",
      [](const Network& net, const Vector& x, std::optional<double> t_max, std::optional<double> tol) {
        const double n = x.norm();
        const AttackResult a = flip_search(net, x, t_max.value_or(10 * n), tol.value_or(1e-6 * n));
        py::dict out;
        out["f_x"] = a.f_x;
        out["grad_norm"] = a.grad_norm;
        out["direction"] = a.direction;
        out["t_star"] = a.t_star;
        out["ratio"] = a.ratio;
        out["paper_eta"] = a.paper_eta;
        out["flipped"] = a.flipped;
        out["magnitude_at_crossing"] = a.magnitude_at_crossing;
        out["evaluations"] = a.evaluations;
        return out;
      },
      py::arg("net"), py::arg("x"), py::arg("t_max") = py::none(), py::arg("tol") = py::none());
  m.def("paper_eta", &paper_eta, py::arg("ell"), py::arg("d"), py::arg("delta"), py::arg("grad_norm"));
  m.def("dimension_sweep",
        [](const std::vector<std::size_t>& dims, std::size_t ell, double factor, std::size_t trials,
           std::uint64_t seed, std::size_t workers) {
          const SweepTable t = dimension_sweep(dims, ell, WidthRule{factor}, trials, seed, workers);
          py::list rows;
          for (const auto& r : t.rows) {
            py::dict row;
            row["d"] = r.d;
            row["flip_rate"] = r.flip_rate;
            row["ratio_median"] = r.ratio_median;
            row["frac_ratio_le_half"] = r.frac_ratio_le_half;
            rows.append(row);
          }
          return py::make_tuple(rows, t.slope);
        },
        py::arg("dims"), py::arg("ell"), py::arg("width_factor") = 1.0, py::arg("trials") = 200,
        py::arg("seed") = 0, py::arg("workers") = 1);

  m.def("probe_value_gradient",
        [](std::size_t d, const std::vector<std::size_t>& widths, std::size_t trials, double delta,
           std::uint64_t seed) {
          return report_dict(probe_value_gradient(Architecture{d, widths}, trials, delta, seed));
        },
        py::arg("d"), py::arg("widths"), py::arg("trials") = 1000, py::arg("delta") = 0.01,
        py::arg("seed") = 0);
  m.def("probe_activation_margin", [](const Network& n, const Vector& x, double alpha) {
    return report_dict(probe_activation_margin(n, x, alpha));
  });
  m.def("probe_sign_flip",
        [](const Vector& x, const Vector& y, std::size_t n_draws, std::uint64_t seed) {
          RngStream rng(seed, 0);
          const SignFlipResult s = probe_sign_flip(x, y, n_draws, rng);
          py::dict out;
          out["empirical"] = s.empirical;
          out["std_error"] = s.std_error;
          out["bound"] = s.bound;
          out["oracle"] = s.oracle;
          return out;
        },
        py::arg("x"), py::arg("y"), py::arg("n_draws") = 100000, py::arg("seed") = 0);

  m.def("kernel_map", &kernel_map);
  m.def("kernel_iterate", [](double theta_0, std::size_t steps) {
    std::vector<std::pair<double, double>> out;
    for (const auto& s : kernel_iterate(theta_0, steps).steps) out.emplace_back(s.theta, s.rho);
    return out;
  });
  m.def("sin_cos_gap", [](std::size_t n) {
    const SinCosGap g = sin_cos_gap(n);
    return py::make_tuple(g.min_margin, g.argmin);
  });

  m.def("experiment_kinds", &experiment_kinds);
  m.def(
      "_run_experiment",
      [](const std::string& config_json) {
        const RunResult r = run_experiment(parse_config(Json::parse(config_json)));
        return py::make_tuple(format_csv(r.columns, r.rows), r.summary.dump());
      },
      "Runs a JSON config; returns (csv text, summary JSON text).");
}
