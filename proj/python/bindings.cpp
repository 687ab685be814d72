#include "vspf/cli.hpp"
#include "vspf/json_io.hpp"
#include "vspf/similarity.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace vspf;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Vec3 to_vec3(const std::array<double, 3>& a)
{
    return Vec3(a[0], a[1], a[2]);
}

std::array<double, 3> from_vec3(const Vec3& v)
{
    return {v.x(), v.y(), v.z()};
}

RigidParams to_params(const std::array<double, 6>& a)
{
    return RigidParams::from_array(a);
}

// numpy arrays are indexed [z, y, x]; x varies fastest as in the C++ layout.
Volume volume_from_array(const Array& arr, const std::array<double, 3>& spacing,
                         const std::array<double, 3>& origin)
{
    if (arr.ndim() != 3) throw InvalidArgument("volume array must be 3-D");
    Grid g;
    g.dims = {static_cast<int>(arr.shape(2)), static_cast<int>(arr.shape(1)),
              static_cast<int>(arr.shape(0))};
    g.spacing = to_vec3(spacing);
    g.origin = to_vec3(origin);
    return Volume(g, std::vector<double>(arr.data(), arr.data() + arr.size()));
}

Array volume_to_array(const Volume& v)
{
    const auto& d = v.grid().dims;
    Array out({d[2], d[1], d[0]});
    std::copy(v.data().begin(), v.data().end(), out.mutable_data());
    return out;
}

Array points_to_array(const std::vector<Vec3>& pts)
{
    Array out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
    auto m = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (int c = 0; c < 3; ++c) m(static_cast<py::ssize_t>(i), c) = pts[i][c];
    return out;
}

std::vector<Vec3> array_to_points(const Array& arr)
{
    if (arr.ndim() != 2 || arr.shape(1) != 3) throw InvalidArgument("points must have shape (n, 3)");
    auto m = arr.unchecked<2>();
    std::vector<Vec3> pts;
    for (py::ssize_t i = 0; i < arr.shape(0); ++i) pts.emplace_back(m(i, 0), m(i, 1), m(i, 2));
    return pts;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Rigid registration with uncertainty-driven voxel sampling";

    // Translators run most recent first, so the base class goes first.
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<Volume>(m, "Volume")
        .def(py::init(&volume_from_array), py::arg("array"),
             py::arg("spacing") = std::array<double, 3>{1, 1, 1},
             py::arg("origin") = std::array<double, 3>{0, 0, 0})
        .def("to_numpy", &volume_to_array)
        .def_property_readonly("shape", [](const Volume& v) {
            const auto& d = v.grid().dims;
            return std::array<int, 3>{d[2], d[1], d[0]};
        })
        .def_property_readonly("spacing", [](const Volume& v) { return from_vec3(v.grid().spacing); })
        .def_property_readonly("origin", [](const Volume& v) { return from_vec3(v.grid().origin); })
        .def_property_readonly("center", [](const Volume& v) { return from_vec3(v.grid().center()); });

    m.def("load_volume", [](const std::string& p) { return load_volume(p); }, py::arg("path"));
    m.def("save_volume", [](const Volume& v, const std::string& p) { save_volume(v, p); },
          py::arg("volume"), py::arg("path"));

    m.def(
        "register_volumes_json",
        [](const Volume& ref, const Volume& mov, const std::string& config) {
            const RegistrationConfig cfg =
                registration_config_from_json(config.empty() ? Json::object() : Json::parse(config));
            RegistrationResult r;
            {
                py::gil_scoped_release release;
                r = register_volumes(ref, mov, cfg);
            }
            Json j = to_json(r);
            j["config"] = to_json(cfg);
            return j.dump();
        },
        py::arg("ref"), py::arg("mov"), py::arg("config") = "");

    m.def(
        "nmi",
        [](const Volume& ref, const Volume& mov, const std::array<double, 6>& theta, int bins) {
            const auto s = default_similarity_settings(ref, mov, bins, ref.grid().center());
            return nmi(joint_histogram(ref, mov, to_params(theta), full_selection(ref.grid()), s)).nmi;
        },
        py::arg("ref"), py::arg("mov"), py::arg("theta"), py::arg("bins") = 32,
        "NMI over all reference voxels, rotation about the reference grid center.");

    m.def(
        "solve_vspf",
        [](const Array& utilities, double voxel_cost, double c_ave, double p_high,
           std::optional<double> a_value) {
            UtilityVector u;
            u.u.assign(utilities.data(), utilities.data() + utilities.size());
            VspfOptions opt;
            opt.a_value = a_value;
            const SamplingField f = solve_vspf(u, voxel_cost, c_ave, p_high, opt);
            py::dict out;
            Array p(std::vector<py::ssize_t>{static_cast<py::ssize_t>(f.p.size())});
            std::copy(f.p.begin(), f.p.end(), p.mutable_data());
            out["p"] = p;
            out["lambda_star"] = f.lambda_star;
            out["a_value"] = f.a_value;
            out["cost"] = cost_j(f, u);
            return out;
        },
        py::arg("utilities"), py::arg("voxel_cost"), py::arg("c_ave"), py::arg("p_high"),
        py::arg("a_value") = py::none());

    m.def(
        "make_phantom_pair",
        [](std::uint64_t seed, const std::string& spec) {
            const PhantomSpec s = phantom_spec_from_json(spec.empty() ? Json::object() : Json::parse(spec));
            const TrainingPair pair = make_phantom_pair(s, seed);
            py::dict out;
            out["ref"] = pair.ref;
            out["mov"] = pair.mov;
            out["gold"] = pair.gold.as_array();
            out["voi_points"] = points_to_array(pair.voi_points);
            out["center"] = from_vec3(pair.center());
            return out;
        },
        py::arg("seed"), py::arg("spec") = "");

    m.def(
        "tre",
        [](const std::array<double, 6>& gold, const std::array<double, 6>& est, const Array& points,
           const std::array<double, 3>& center) {
            return tre(to_params(gold), to_params(est), array_to_points(points), to_vec3(center));
        },
        py::arg("gold"), py::arg("estimate"), py::arg("points"), py::arg("center"));

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            py::gil_scoped_release release;
            return run_cli(args);
        },
        py::arg("args"));
}
