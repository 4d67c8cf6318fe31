#include "rgbdsal/networks.hpp"

#include <cmath>

namespace rgbdsal {

ArchConfig parse_arch(const std::string& name, FusionMode fusion) {
  ArchConfig a;
  a.fusion = fusion;
  if (name == "simple") {
    a.head = HeadMode::simple;
  } else if (name == "omega-rgb-d") {
    a.head = HeadMode::omega_sum;
    a.cross_connections = false;
  } else if (name == "omega-rgbd-d") {
    a.head = HeadMode::omega_sum;
  } else if (name == "msf-rgb-d") {
    a.cross_connections = false;
  } else if (name == "msf-rgbd-d") {
    // defaults
  } else {
    throw_usage("unknown arch '" + name +
                "' (expected simple, omega-rgb-d, omega-rgbd-d, msf-rgb-d or msf-rgbd-d)");
  }
  return a;
}

std::string arch_name(const ArchConfig& arch) {
  switch (arch.head) {
    case HeadMode::simple: return "simple";
    case HeadMode::omega_sum: return arch.cross_connections ? "omega-rgbd-d" : "omega-rgb-d";
    case HeadMode::msf: return arch.cross_connections ? "msf-rgbd-d" : "msf-rgb-d";
  }
  return "msf-rgbd-d";
}

std::string stream_prefix(Stream s) {
  switch (s) {
    case Stream::rgb: return "rgb/";
    case Stream::depth: return "d/";
    case Stream::dca: return "dca/";
  }
  return "";
}

void validate_working_resolution(int resolution) {
  if (resolution < 16 || resolution % 16 != 0) {
    throw_usage("working resolution must be a positive multiple of 16, got " + std::to_string(resolution));
  }
}

StreamMaps predict_streams(const ModelBundle<float>& bundle, const RgbdSample& s) {
  nn::Graph<float> g(false);
  EncoderPyramid<float> dpyr;
  auto d = d_subnet_forward(g, bundle, s, &dpyr);
  auto r = rgb_subnet_forward(g, bundle, s, &dpyr);
  return {nn::map_from_tensor(g.value(r.saliency)), nn::map_from_tensor(g.value(d.saliency)), {}, {}};
}

StreamMaps predict_all(const ModelBundle<float>& bundle, const RgbdSample& s) {
  nn::Graph<float> g(false);
  auto out = full_forward(g, bundle, s);
  return {nn::map_from_tensor(g.value(out.rgb.saliency)), nn::map_from_tensor(g.value(out.depth.saliency)),
          nn::map_from_tensor(g.value(out.dca.omega)), nn::map_from_tensor(g.value(out.final_map))};
}

ScalarMap predict_omega(const ModelBundle<float>& bundle, const RgbdSample& s) {
  nn::Graph<float> g(false);
  return nn::map_from_tensor(g.value(dca_forward(g, bundle, s).omega));
}

namespace {

double soft_bce(const Plane<float>& pred, const Plane<float>& target) {
  constexpr double eps = 1e-7;
  const Eigen::ArrayXXd p = pred.cast<double>().cwiseMax(eps).cwiseMin(1.0 - eps);
  const Eigen::ArrayXXd t = target.cast<double>();
  return -(t * p.log() + (1.0 - t) * (1.0 - p).log()).mean();
}

}  // namespace

double dca_loss(const ScalarMap& omega, const ScalarMap& pgt) {
  require_same_shape(omega, pgt, "dca_loss");
  return soft_bce(omega.values(), pgt.values());
}

double saliency_loss(const ScalarMap& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "saliency_loss");
  return soft_bce(pred.values(), gt.values());
}

void load_pretrained_encoder(ModelBundle<float>& bundle, const nn::ParameterStore<float>& encoder) {
  for (int k = 1; k <= 5; ++k) {
    for (int j = 1; j <= 2; ++j) {
      const std::string key = "enc" + std::to_string(k) + "/conv" + std::to_string(j);
      const auto& w = encoder.at(key + "/w").value;
      const auto& b = encoder.at(key + "/b").value;
      for (Stream s : {Stream::rgb, Stream::depth, Stream::dca}) {
        auto& dw = bundle.params.at(stream_prefix(s) + key + "/w").value;
        auto& db = bundle.params.at(stream_prefix(s) + key + "/b").value;
        if (db.rows() != b.rows()) {
          throw_data("pretrained encoder '" + key + "' has " + std::to_string(b.rows()) + " filters, bundle expects " +
                     std::to_string(db.rows()));
        }
        db = b;
        if (k > 1 || j > 1) {
          if (dw.cols() != w.cols()) throw_data("pretrained encoder '" + key + "' has mismatched input width");
          dw = w;
          continue;
        }
        if (w.cols() != 27) throw_data("pretrained first layer must take 3 input channels");
        // columns are channel-major: [c*9 + tap]
        DenseMatrix<float> mean = (w.middleCols(0, 9) + w.middleCols(9, 9) + w.middleCols(18, 9)) / 3.0f;
        if (s == Stream::rgb) {
          dw = w;
        } else if (s == Stream::depth) {
          dw = mean;
        } else {
          dw.middleCols(0, 27) = w;
          dw.middleCols(27, 9) = mean;
        }
      }
    }
  }
}

}  // namespace rgbdsal
