#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "ainx/model.hpp"

namespace ainx::profiler {

struct Conventions {
  /// Report MACs under the GFLOPs heading (the efficiency-literature habit).
  bool macs_as_flops = true;
  /// Count batch-norm running statistics as parameters.
  bool count_bn = false;
};

struct LayerRow {
  std::string name;
  std::string type;  // conv, bn, relu, maxpool, add, avgpool, linear
  Shape out_shape;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  /// BN/ReLU/pool/add work, kept out of the MAC total.
  std::uint64_t elementwise = 0;
};

struct ProfileReport {
  std::vector<LayerRow> rows;
  std::uint64_t total_params = 0;
  std::uint64_t total_macs = 0;
  std::uint64_t total_flops = 0;  // 2 * MACs
  std::uint64_t total_elementwise = 0;
  Conventions conventions;

  /// The GFLOPs figure under the report's convention.
  double gflops() const;
};

/// Per-layer parameter and MAC accounting for an [N, C, T, F] input.
/// Purely symbolic; nothing is executed.
ProfileReport profile(const model::Model& model, const Shape& input_shape, Conventions conventions = {});

/// Learnable element count (frozen or not), plus running statistics when
/// `include_bn_buffers` is set.
std::uint64_t count_params(const model::Model& model, bool include_bn_buffers = false);
std::uint64_t count_macs(const model::Model& model, const Shape& input_shape);

enum class TableFormat { text, csv };

/// Columns name, type, out_shape, params, macs, elementwise; totals last.
void emit_table(const ProfileReport& report, TableFormat format, std::ostream& out);
std::string csv_escape(const std::string& field);

}  // namespace ainx::profiler
