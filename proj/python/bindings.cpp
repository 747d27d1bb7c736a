#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "uavheal/channel.hpp"
#include "uavheal/errors.hpp"
#include "uavheal/experiments.hpp"
#include "uavheal/gcn.hpp"
#include "uavheal/meta.hpp"
#include "uavheal/sim.hpp"
#include "uavheal/topology_io.hpp"
#include "uavheal/vrg.hpp"

namespace py = pybind11;
using namespace uavheal;
using nlohmann::json;

namespace {

Topology as_topology(const Positions& p, std::optional<std::vector<int>> indices) {
  if (indices) return Topology(*indices, p);
  return Topology::sequential(p);
}

LinkPredicate within(double radius) {
  if (!(radius > 0.0)) throw Error(ErrorCode::Domain, "radius must be positive");
  return [radius](double d) { return d <= radius; };
}

py::dict heal_dict(const HealResult& r) {
  py::dict d;
  d["targets"] = r.targets.positions();
  d["j_s"] = r.j_s;
  d["l_max"] = r.l_max;
  d["fallback"] = r.fallback;
  d["cluster_trace"] = r.cluster_trace;
  return d;
}

ExperimentConfig config_from(const std::string& text) {
  ExperimentConfig cfg;
  merge_config(cfg, text.empty() ? json::object() : json::parse(text));
  cfg.validate();
  return cfg;
}

std::optional<MetaParamStore> store_from(const std::optional<std::string>& path) {
  if (!path) return std::nullopt;
  return load_store(*path);
}

}  // namespace

PYBIND11_MODULE(_uavheal, m) {
  m.doc() = "UAV swarm self-healing core";

  static py::exception<Error> error(m, "UavhealError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    } catch (const json::exception& e) {
      py::set_error(PyExc_ValueError, e.what());
    }
  });

  py::class_<ChannelParams>(m, "ChannelParams")
      .def(py::init<>())
      .def_static("physical", &ChannelParams::physical)
      .def_readwrite("transmit_power_dBm", &ChannelParams::transmit_power_dBm)
      .def_readwrite("receive_threshold_dBm", &ChannelParams::receive_threshold_dBm)
      .def_readwrite("antenna_gain_rx_dBi", &ChannelParams::antenna_gain_rx_dBi)
      .def_readwrite("antenna_gain_tx_dBi", &ChannelParams::antenna_gain_tx_dBi)
      .def_readwrite("path_loss_exponent", &ChannelParams::path_loss_exponent)
      .def_readwrite("carrier_freq_Hz", &ChannelParams::carrier_freq_Hz)
      .def_readwrite("light_speed_m_s", &ChannelParams::light_speed_m_s)
      .def_readwrite("scatter_strength", &ChannelParams::scatter_strength)
      .def_readwrite("rice_factor", &ChannelParams::rice_factor)
      .def_readwrite("small_scale_enabled", &ChannelParams::small_scale_enabled)
      .def_readwrite("clec_distance_override_m", &ChannelParams::clec_distance_override_m);

  m.def("log_bessel_i0", &log_bessel_i0, py::arg("x"));
  m.def("received_power_dBm", &received_power_dBm, py::arg("params"), py::arg("distance_m"));
  m.def("clec_satisfied", &clec_satisfied, py::arg("params"), py::arg("distance_m"));
  m.def("max_link_distance", &max_link_distance, py::arg("params"));

  m.def(
      "cluster_count",
      [](const Positions& p, double radius) { return cluster_count(Topology::sequential(p), within(radius)); },
      py::arg("positions"), py::arg("radius") = 120.0);
  m.def(
      "laplacian",
      [](const Positions& p, double radius) { return laplacian(build_graph(Topology::sequential(p), within(radius))); },
      py::arg("positions"), py::arg("radius") = 120.0);
  m.def("zero_eig_multiplicity", py::overload_cast<const Eigen::MatrixXd&>(&zero_eig_multiplicity),
        py::arg("laplacian"));
  m.def(
      "min_virtual_distance", [](const Positions& p) { return min_virtual_distance(Topology::sequential(p)); },
      py::arg("positions"));
  m.def(
      "virtual_distance",
      [](const Positions& p, double eta) { return virtual_distance(Topology::sequential(p), eta).d_v_m; },
      py::arg("positions"), py::arg("eta"));
  m.def(
      "gco_iterate",
      [](const Positions& p, double eta, double epsilon, double radius, int max_iterations) {
        const auto t = Topology::sequential(p);
        const auto vrg = build_vrg(t, virtual_distance(t, eta).d_v_m);
        const auto r = gco_iterate(t, vrg, GcoConfig{epsilon, max_iterations}, within(radius));
        return py::make_tuple(r.topology.positions(), r.k_star);
      },
      py::arg("positions"), py::arg("eta") = 0.3, py::arg("epsilon") = 1.0, py::arg("radius") = 120.0,
      py::arg("max_iterations") = 10000);

  m.def(
      "cen_heal",
      [](const Positions& p, double radius, double speed) {
        return heal_dict(cen_heal(Topology::sequential(p), within(radius), HealConfig{speed, 100000}));
      },
      py::arg("positions"), py::arg("radius") = 120.0, py::arg("speed") = 1.0);
  m.def(
      "cr_mgc_heal",
      [](const Positions& p, double radius, double speed, std::uint64_t seed, std::optional<std::string> store) {
        const auto s = store_from(store);
        GcnPlanner planner(s ? s->hyper : GcnHyper{}, s ? &*s : nullptr, seed, within(radius));
        return heal_dict(cr_mgc_heal(Topology::sequential(p), planner, within(radius), HealConfig{speed, 100000}));
      },
      py::arg("positions"), py::arg("radius") = 120.0, py::arg("speed") = 1.0, py::arg("seed") = 1,
      py::arg("store") = std::nullopt);

  m.def(
      "topology_to_csv",
      [](const Positions& p, std::optional<std::vector<int>> indices) {
        return topology_to_csv(as_topology(p, std::move(indices)));
      },
      py::arg("positions"), py::arg("indices") = std::nullopt);
  m.def(
      "topology_from_csv",
      [](const std::string& text) {
        const auto t = topology_from_csv(text);
        return py::make_tuple(t.indices(), t.positions());
      },
      py::arg("text"));

  m.def(
      "_run_experiment",
      [](const std::string& name, const std::string& config, std::optional<std::string> store) {
        const ExperimentConfig cfg = config_from(config);
        py::gil_scoped_release release;
        const auto s = store_from(store);
        const MetaParamStore* sp = s ? &*s : nullptr;
        if (name == "sweep-c") return render(sweep_c(cfg));
        if (name == "sweep-eta") return render(sweep_eta(cfg));
        if (name == "sweep-eps") return render(sweep_eps(cfg));
        if (name == "heal-oneoff") return render(heal_oneoff(cfg, sp), cfg.record_trajectory);
        if (name == "sim-general") return render(sim_general(cfg, sp), cfg.record_trajectory);
        if (name == "bench") return render(bench(cfg, sp));
        if (name == "meta-train") return render(run_meta_train(cfg));
        throw Error(ErrorCode::Config, "unknown experiment '" + name + "'");
      },
      py::arg("name"), py::arg("config") = "", py::arg("store") = std::nullopt);
}
