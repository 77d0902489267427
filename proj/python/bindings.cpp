#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bioseg/experiments.hpp"
#include "bioseg/gradcheck.hpp"
#include "bioseg/loss.hpp"
#include "bioseg/model.hpp"
#include "bioseg/phantom.hpp"
#include "bioseg/stream.hpp"
#include "bioseg/trainer.hpp"

namespace py = pybind11;
using namespace bioseg;

namespace {

ImageF image_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ContractViolation("expected a 2-D float array");
    ImageF img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), img.px.begin());
    return img;
}

py::array_t<float> image_to_array(const ImageF& img) {
    py::array_t<float> out({img.height, img.width});
    std::copy(img.px.begin(), img.px.end(), out.mutable_data());
    return out;
}

BinaryMask mask_from_array(const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ContractViolation("expected a 2-D uint8 array");
    BinaryMask m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    for (py::ssize_t i = 0; i < a.size(); ++i)
        m.values[static_cast<size_t>(i)] = a.data()[i] ? 1 : 0;
    return m;
}

py::array_t<uint8_t> mask_to_array(const BinaryMask& m) {
    py::array_t<uint8_t> out({m.height, m.width});
    std::copy(m.values.begin(), m.values.end(), out.mutable_data());
    return out;
}

Tensor batch_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() == 2) {
        Tensor t(1, 1, static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
        std::copy(a.data(), a.data() + a.size(), t.data.begin());
        return t;
    }
    if (a.ndim() == 4) {
        Tensor t(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                 static_cast<int>(a.shape(2)), static_cast<int>(a.shape(3)));
        std::copy(a.data(), a.data() + a.size(), t.data.begin());
        return t;
    }
    throw ContractViolation("expected a (h,w) or (n,c,h,w) float array");
}

py::array_t<float> batch_to_array(const Tensor& t) {
    py::array_t<float> out({t.n(), t.c(), t.h(), t.w()});
    std::copy(t.data.begin(), t.data.end(), out.mutable_data());
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "vessel-feature segmentation core: phantoms, model, metrics, streams";

    py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("in_channels", &ModelConfig::in_channels)
        .def_readwrite("out_channels", &ModelConfig::out_channels)
        .def_readwrite("init_filters", &ModelConfig::init_filters)
        .def_readwrite("blocks_down", &ModelConfig::blocks_down)
        .def_readwrite("blocks_up", &ModelConfig::blocks_up)
        .def_readwrite("patch_size", &ModelConfig::patch_size)
        .def("validate", &ModelConfig::validate)
        .def("downsample_factor", &ModelConfig::downsample_factor);

    py::class_<SegResNet>(m, "SegResNet")
        .def(py::init<ModelConfig, uint64_t>(), py::arg("config"), py::arg("seed") = 0)
        .def_property_readonly("config", &SegResNet::config)
        .def_property_readonly("parameter_count", &SegResNet::parameter_count)
        .def(
            "forward",
            [](SegResNet& self, const py::array_t<float, py::array::c_style |
                                                             py::array::forcecast>& x,
               bool train) {
                return batch_to_array(
                    self.forward(batch_from_array(x), train ? nn::Mode::train : nn::Mode::infer));
            },
            py::arg("x"), py::arg("train") = false)
        .def(
            "segment",
            [](SegResNet& self, const py::array_t<float, py::array::c_style |
                                                             py::array::forcecast>& image,
               float theta) { return mask_to_array(tiled_infer(self, image_from_array(image), theta)); },
            py::arg("image"), py::arg("theta") = 0.5f,
            "Tiled inference over a patch-multiple image, binarized mask out.")
        .def("save", [](const SegResNet& self, const std::string& path) {
            save_weights(self, path);
        });

    m.def(
        "load_model",
        [](const std::string& path) { return load_weights<float>(path); },
        py::arg("path"));

    m.def(
        "gen_phantom",
        [](const std::string& style, int size, uint64_t seed, int n_trees, double radius_min,
           double radius_max, double contrast, double branch_prob) {
            PhantomParams p;
            p.style = style_from_name(style);
            p.size = size;
            p.seed = seed;
            p.n_trees = n_trees;
            p.radius_min = radius_min;
            p.radius_max = radius_max;
            p.vessel_contrast = contrast;
            p.branch_prob = branch_prob;
            const Phantom ph = gen_phantom(p);
            return py::make_tuple(image_to_array(ph.image), mask_to_array(ph.mask));
        },
        py::arg("style"), py::arg("size") = 224, py::arg("seed") = 0, py::arg("n_trees") = 3,
        py::arg("radius_min") = 2.0, py::arg("radius_max") = 5.0, py::arg("contrast") = 0.55,
        py::arg("branch_prob") = 0.03,
        "Deterministic synthetic vessel phantom: (image, mask).");

    m.def(
        "gen_stream",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& image,
           const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& mask,
           int n_frames, double fps, const std::string& motion, double amplitude, double period,
           double noise, uint64_t seed) {
            MotionModel mm;
            if (motion == "static") {
                mm.kind = MotionKind::motion_static;
            } else if (motion == "sin") {
                mm.kind = MotionKind::sinusoidal;
                mm.amplitude_px = amplitude;
                mm.period_s = period;
            } else {
                throw ContractViolation("motion must be static|sin");
            }
            return gen_stream(image_from_array(image), mask_from_array(mask), n_frames, fps, mm,
                              noise, seed);
        },
        py::arg("image"), py::arg("mask"), py::arg("n_frames"), py::arg("fps") = 19.6,
        py::arg("motion") = "static", py::arg("amplitude") = 0.0, py::arg("period") = 4.0,
        py::arg("noise") = 0.0, py::arg("seed") = 0);

    py::class_<FrameStream>(m, "FrameStream")
        .def_readonly("width", &FrameStream::width)
        .def_readonly("height", &FrameStream::height)
        .def_readonly("fps", &FrameStream::fps)
        .def_property_readonly("n_frames", &FrameStream::n_frames)
        .def("frame", [](const FrameStream& self, int i) {
            if (i < 0 || i >= self.n_frames())
                throw ContractViolation("frame index out of range");
            py::array_t<uint16_t> out({self.height, self.width});
            std::copy(self.frame(i), self.frame(i) + static_cast<size_t>(self.height) * self.width,
                      out.mutable_data());
            return out;
        });

    m.def("read_stream", [](const std::string& path) { return read_stream(path); });
    m.def("write_stream", [](const FrameStream& s, const std::string& path) {
        write_stream(s, path);
    });
    m.def(
        "accumulate",
        [](const FrameStream& s, int start, int count) {
            return image_to_array(accumulate(s, start, count));
        },
        py::arg("stream"), py::arg("start"), py::arg("count"),
        "64-bit frame sum over [start, start+count), min-max normalized.");

    m.def(
        "dice_score",
        [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& a,
           const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& b) {
            return dice_score(mask_from_array(a), mask_from_array(b));
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "iou_score",
        [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& a,
           const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& b) {
            return iou_score(mask_from_array(a), mask_from_array(b));
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "boundary_iou",
        [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& a,
           const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& b, int d) {
            return boundary_iou(mask_from_array(a), mask_from_array(b), d);
        },
        py::arg("a"), py::arg("b"), py::arg("d") = 2);
    m.def(
        "largest_component",
        [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& mask,
           int connectivity) {
            return mask_to_array(largest_component(mask_from_array(mask), connectivity));
        },
        py::arg("mask"), py::arg("connectivity") = 8);

    m.def(
        "dice_loss",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& target,
           double smooth) { return dice_loss(batch_from_array(pred), batch_from_array(target), smooth).value; },
        py::arg("pred"), py::arg("target"), py::arg("smooth") = 1e-5);
    m.def(
        "bce_loss",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& target) {
            return bce_loss(batch_from_array(pred), batch_from_array(target)).value;
        },
        py::arg("pred"), py::arg("target"));
    m.def(
        "combined_loss",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& target,
           double lambda1, double lambda2, double smooth) {
            return combined_loss(batch_from_array(pred), batch_from_array(target),
                                 LossWeights{lambda1, lambda2, smooth})
                .value;
        },
        py::arg("pred"), py::arg("target"), py::arg("lambda1") = 1.0, py::arg("lambda2") = 0.1,
        py::arg("smooth") = 1e-5);

    m.def(
        "run_gradchecks",
        [](uint64_t seed) {
            py::list out;
            for (const GradCheckCase& c : run_all_gradchecks(seed))
                out.append(py::make_tuple(c.name, c.max_rel_err, c.tolerance, c.passed));
            return out;
        },
        py::arg("seed") = 42,
        "Finite-difference verification of every op, the loss and the network.");

    m.attr("__version__") = "0.1.0";
}
