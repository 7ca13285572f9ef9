#include "ainx/profiler.hpp"

#include <cstdio>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace ainx::profiler {

namespace {

using model::BatchNormLayer;
using model::Conv2dLayer;
using model::Model;

class Walker {
 public:
  explicit Walker(ProfileReport& report) : report_(report) {}

  Shape conv(const Conv2dLayer<float>& c, const Shape& in) {
    const auto g = kernels::ConvGeometry::make(in, c.weight.shape(), c.spec);
    Shape out{g.batch, g.out_channels, g.out_h, g.out_w};
    LayerRow row{c.name, "conv", out, c.weight.numel() + (c.bias.defined() ? c.bias.numel() : 0), 0, 0};
    row.macs = std::uint64_t(g.out_channels) * g.in_per_group() * c.spec.kernel_h * c.spec.kernel_w * g.out_h *
               g.out_w * g.batch;
    report_.rows.push_back(row);
    return out;
  }

  Shape bn(const BatchNormLayer<float>& b, const Shape& in) {
    std::uint64_t params = b.gamma.numel() + b.beta.numel();
    if (report_.conventions.count_bn) params += b.running_mean.numel() + b.running_var.numel();
    report_.rows.push_back({b.name, "bn", in, params, 0, shape_numel(in)});
    return in;
  }

  Shape relu(const std::string& name, const Shape& in) {
    report_.rows.push_back({name, "relu", in, 0, 0, shape_numel(in)});
    return in;
  }

  Shape add(const std::string& name, const Shape& in, std::size_t count = 1) {
    report_.rows.push_back({name, "add", in, 0, 0, shape_numel(in) * count});
    return in;
  }

  Shape maxpool(const std::string& name, const PoolSpec& spec, const Shape& in) {
    const auto g = kernels::PoolGeometry::make(in, spec);
    Shape out{g.batch, g.channels, g.out_h, g.out_w};
    report_.rows.push_back({name, "maxpool", out, 0, 0, shape_numel(out) * spec.kernel_h * spec.kernel_w});
    return out;
  }

  Shape avgpool(const std::string& name, const Shape& in) {
    Shape out{in[0], in[1]};
    report_.rows.push_back({name, "avgpool", out, 0, 0, shape_numel(in)});
    return out;
  }

  Shape linear(const std::string& name, const Tensor& w, const Tensor& b, const Shape& in) {
    if (in[1] != w.dim(1)) throw std::invalid_argument("profile: head expects " + std::to_string(w.dim(1)) + " features");
    Shape out{in[0], w.dim(0)};
    report_.rows.push_back({name, "linear", out, w.numel() + b.numel(), std::uint64_t(in[0]) * w.dim(0) * w.dim(1), 0});
    return out;
  }

 private:
  ProfileReport& report_;
};

std::string format_shape(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

}  // namespace

double ProfileReport::gflops() const { return double(conventions.macs_as_flops ? total_macs : total_flops) / 1e9; }

ProfileReport profile(const Model& model, const Shape& input_shape, Conventions conventions) {
  if (input_shape.size() != 4 || input_shape[1] != model.config().in_channels) {
    throw std::invalid_argument("profile: input shape must be [N," + std::to_string(model.config().in_channels) +
                                ",T,F], got " + shape_to_string(input_shape));
  }
  for (std::size_t e : input_shape) {
    if (e == 0) throw std::invalid_argument("profile: zero extent in " + shape_to_string(input_shape));
  }
  model::stage_extents(model.config(), input_shape[2], input_shape[3]);
  ProfileReport report;
  report.conventions = conventions;
  Walker w(report);
  const auto& stem = model.stem();
  Shape x = w.conv(stem.conv, input_shape);
  x = w.bn(stem.bn, x);
  x = w.relu("stem.relu", x);
  x = w.maxpool("stem.pool", stem.pool, x);
  for (const auto& st : model.stages()) {
    if (st.has_downsample) {
      x = w.conv(st.downsample, x);
      x = w.bn(st.downsample_bn, x);
    }
    for (const auto& b : st.blocks) {
      for (const auto& br : b.branches) {
        Shape y = w.conv(br.dw_1xk, x);
        y = w.bn(br.bn_1xk, y);
        y = w.relu(br.dw_1xk.name + ".relu", y);
        y = w.conv(br.dw_kx1, y);
        y = w.bn(br.bn_kx1, y);
        w.relu(br.dw_kx1.name + ".relu", y);
      }
      if (b.branches.size() > 1) w.add(b.name + ".branch_sum", x, b.branches.size() - 1);
      Shape h = w.conv(b.expand, x);
      h = w.relu(b.expand.name + ".relu", h);
      h = w.conv(b.squeeze, h);
      h = w.bn(b.bn, h);
      x = w.add(b.name + ".residual", h);
    }
  }
  x = w.avgpool("head.pool", x);
  w.linear("head", model.head().weight, model.head().bias, x);
  for (const auto& r : report.rows) {
    report.total_params += r.params;
    report.total_macs += r.macs;
    report.total_elementwise += r.elementwise;
  }
  report.total_flops = 2 * report.total_macs;
  return report;
}

std::uint64_t count_params(const Model& model, bool include_bn_buffers) {
  std::uint64_t n = 0;
  for (const auto& p : model.named_parameters()) n += p.tensor.numel();
  if (include_bn_buffers) {
    for (const auto& b : model.named_buffers()) n += b.tensor.numel();
  }
  return n;
}

std::uint64_t count_macs(const Model& model, const Shape& input_shape) {
  return profile(model, input_shape).total_macs;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void emit_table(const ProfileReport& report, TableFormat format, std::ostream& out) {
  const std::string conventions = std::string("macs_as_flops=") + (report.conventions.macs_as_flops ? "true" : "false") +
                                  ";count_bn=" + (report.conventions.count_bn ? "true" : "false");
  if (format == TableFormat::csv) {
    out << "name,type,out_shape,params,macs,elementwise\r\n";
    for (const auto& r : report.rows) {
      out << csv_escape(r.name) << ',' << csv_escape(r.type) << ',' << format_shape(r.out_shape) << ',' << r.params
          << ',' << r.macs << ',' << r.elementwise << "\r\n";
    }
    out << "total," << csv_escape(conventions) << ",," << report.total_params << ',' << report.total_macs << ','
        << report.total_elementwise << "\r\n";
    return;
  }
  std::size_t name_w = 5;
  for (const auto& r : report.rows) name_w = std::max(name_w, r.name.size());
  auto line = [&](const std::string& name, const std::string& type, const std::string& shape, const std::string& params,
                  const std::string& macs, const std::string& elem) {
    out << std::left << std::setw(int(name_w) + 2) << name << std::setw(9) << type << std::setw(18) << shape
        << std::right << std::setw(12) << params << std::setw(16) << macs << std::setw(14) << elem << '\n';
  };
  line("name", "type", "out_shape", "params", "macs", "elementwise");
  for (const auto& r : report.rows) {
    line(r.name, r.type, format_shape(r.out_shape), std::to_string(r.params), std::to_string(r.macs),
         std::to_string(r.elementwise));
  }
  line("total", "", "", std::to_string(report.total_params), std::to_string(report.total_macs),
       std::to_string(report.total_elementwise));
  char buf[160];
  std::snprintf(buf, sizeof buf, "params: %.2fM  MACs: %.3fG  FLOPs (2*MACs): %.3fG  GFLOPs reported: %.3f\n",
                double(report.total_params) / 1e6, double(report.total_macs) / 1e9, double(report.total_flops) / 1e9,
                report.gflops());
  out << buf << "conventions: " << conventions << '\n';
}

}  // namespace ainx::profiler
