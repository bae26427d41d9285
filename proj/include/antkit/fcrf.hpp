#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "antkit/arch.hpp"

namespace antkit {

struct AnalysisError : std::runtime_error {
  explicit AnalysisError(const std::string& m) : std::runtime_error(m) {}
};

// Boolean channel-dependency matrix: entry (o,i) is true iff output channel
// o can structurally depend on input channel i. Potential dependency only;
// zero-valued weights never shrink the matrix. Rows are packed 64 bits per
// word.
class DependencyMatrix {
 public:
  DependencyMatrix(int rows, int cols);
  static DependencyMatrix identity(int n);
  static DependencyMatrix all_true(int rows, int cols);
  // Grouped 1x1/KxK conv: output channel o reads only its group's input
  // slab. Input slabs are contiguous in both layouts; the layout decides
  // which group an output channel belongs to.
  static DependencyMatrix group_conv(int cout, int cin, int g,
                                     GroupLayout layout);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool get(int o, int i) const;
  void set(int o, int i, bool v);

  // Boolean matrix product with exists-path semantics: (*this) applied after
  // `first`. Result is rows() x first.cols().
  DependencyMatrix compose(const DependencyMatrix& first) const;
  void union_with(const DependencyMatrix& other);

  bool all() const;
  double density() const;
  std::optional<std::pair<int, int>> first_false() const;  // (o,i)
  std::string grid() const;  // one 0/1 line per output channel

  bool operator==(const DependencyMatrix&) const = default;

 private:
  int rows_ = 0, cols_ = 0, words_ = 0;
  std::vector<std::uint64_t> bits_;
};

// Dependency of one block, output channels over input channels. Attention is
// all-absorbing (global pooling feeds every mask entry from every channel);
// the depthwise stage is per-channel; the grouped projection follows the
// layout pattern; an active residual unions the identity.
DependencyMatrix block_dependency(const BlockConfig& cfg);
DependencyMatrix e_block_dependency(const BlockConfig& base,
                                    const std::vector<int>& branch_groups);

// Dependency of the convolutional trunk (stem through the 1x1 head). The
// classifier's pooling and FC mix every channel by construction and would
// mask any locality, so the network verdict stops before them.
DependencyMatrix network_dependency(const NetworkSpec& spec);

struct BlockVerdict {
  std::string name;
  bool fcrf = false;
  double density = 0;
};

struct FcrfVerdict {
  bool fcrf = false;
  std::optional<std::pair<int, int>> witness;  // uncovered (out,in) pair
  double matrix_density = 0;
  std::vector<BlockVerdict> blocks;
};

FcrfVerdict check_fcrf(const NetworkSpec& spec);
FcrfVerdict check_fcrf(const BlockConfig& cfg);

std::string verdict_json(const FcrfVerdict& v);

}  // namespace antkit
