#pragma once

// MNIST-style workload: IDX ingestion, 28x28 -> 11x11 area-average pooling
// with binarization, mapping a single-layer binary model onto a subarray,
// and accuracy evaluation against a pure software reference.

#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "xbar/compute.hpp"

namespace xbar {

// ---------------------------------------------------------------------------
// IDX files.

struct GrayImage {
  int rows = 28;
  int cols = 28;
  std::vector<std::uint8_t> px;  // row-major
  std::uint8_t at(int r, int c) const {
    return px[static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)];
  }
};

struct MnistData {
  std::vector<GrayImage> images;
  std::vector<int> labels;
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& what) {
  std::uint8_t b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("truncated IDX file while reading " + what);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace detail

inline std::vector<GrayImage> load_idx_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  if (detail::read_be32(in, "magic") != 0x00000803u)
    throw std::runtime_error("bad image-file magic in " + path);
  std::uint32_t n = detail::read_be32(in, "count");
  std::uint32_t rows = detail::read_be32(in, "rows");
  std::uint32_t cols = detail::read_be32(in, "cols");
  if (rows != 28 || cols != 28)
    throw std::runtime_error("expected 28x28 images in " + path);
  std::vector<GrayImage> images(n);
  for (auto& img : images) {
    img.rows = static_cast<int>(rows);
    img.cols = static_cast<int>(cols);
    img.px.resize(static_cast<size_t>(rows) * cols);
    if (!in.read(reinterpret_cast<char*>(img.px.data()),
                 static_cast<std::streamsize>(img.px.size())))
      throw std::runtime_error("truncated image data in " + path);
  }
  return images;
}

inline std::vector<int> load_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  if (detail::read_be32(in, "magic") != 0x00000801u)
    throw std::runtime_error("bad label-file magic in " + path);
  std::uint32_t n = detail::read_be32(in, "count");
  std::vector<std::uint8_t> raw(n);
  if (n && !in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n)))
    throw std::runtime_error("truncated label data in " + path);
  std::vector<int> labels(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (raw[i] > 9) throw std::runtime_error("label out of range in " + path);
    labels[i] = raw[i];
  }
  return labels;
}

inline MnistData load_mnist(const std::string& images_path, const std::string& labels_path) {
  MnistData d;
  d.images = load_idx_images(images_path);
  d.labels = load_idx_labels(labels_path);
  if (d.images.size() != d.labels.size())
    throw std::runtime_error("image/label count mismatch");
  return d;
}

// Directory convenience using the fixture file names.
inline MnistData load_mnist(const std::string& dir) {
  return load_mnist(dir + "/test-images-idx3-ubyte", dir + "/test-labels-idx1-ubyte");
}

// ---------------------------------------------------------------------------
// Downscaling and binarization.

struct BinaryImage {
  std::array<std::uint8_t, 121> bits{};  // 11x11, row-major
  int label = -1;

  int bit(int r, int c) const { return bits[static_cast<size_t>(r) * 11 + static_cast<size_t>(c)]; }
  std::vector<int> as_vector() const { return std::vector<int>(bits.begin(), bits.end()); }
  int popcount() const {
    int n = 0;
    for (auto b : bits) n += b;
    return n;
  }
};

// Exact area-average pooling 28 -> 11 followed by thresholding. Working in
// elevenths of a source pixel keeps all overlap weights integral: target
// cell (i, j) covers [28i, 28(i+1)) x [28j, 28(j+1)) in those units, so the
// weights per target cell sum to 28*28 = 784 and the comparison
// "average >= threshold" becomes the integer test "sum >= threshold * 784".
inline BinaryImage downscale_binarize(const GrayImage& img, int threshold = 128) {
  if (img.rows != 28 || img.cols != 28)
    throw std::invalid_argument("expected a 28x28 image");
  auto overlap = [](int t, int s) {
    int lo = std::max(28 * t, 11 * s);
    int hi = std::min(28 * (t + 1), 11 * (s + 1));
    return std::max(0, hi - lo);
  };
  BinaryImage out;
  for (int ti = 0; ti < 11; ++ti)
    for (int tj = 0; tj < 11; ++tj) {
      std::int64_t sum = 0;
      for (int si = 0; si < 28; ++si) {
        int wr = overlap(ti, si);
        if (wr == 0) continue;
        for (int sj = 0; sj < 28; ++sj) {
          int wc = overlap(tj, sj);
          if (wc == 0) continue;
          sum += static_cast<std::int64_t>(wr) * wc * img.at(si, sj);
        }
      }
      out.bits[static_cast<size_t>(ti) * 11 + static_cast<size_t>(tj)] =
          sum >= static_cast<std::int64_t>(threshold) * 784 ? 1 : 0;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Binary NN model fixture.

struct BinaryNnModel {
  std::vector<BitMatrix> weights;   // one matrix per layer, rows = neurons
  std::vector<int> thresholds;      // per layer, in active-input counts

  void validate() const {
    if (weights.empty() || weights.size() != thresholds.size())
      throw std::invalid_argument("model layers and thresholds mismatch");
    for (size_t l = 0; l < weights.size(); ++l) {
      const auto& w = weights[l];
      if (w.empty() || w.front().empty()) throw std::invalid_argument("empty weight matrix");
      size_t cols = w.front().size();
      for (const auto& row : w) {
        if (row.size() != cols) throw std::invalid_argument("ragged weight matrix");
        for (int v : row)
          if (v != 0 && v != 1) throw std::invalid_argument("weights must be bits");
      }
      if (thresholds[l] < 0 || thresholds[l] > static_cast<int>(cols))
        throw std::invalid_argument("threshold outside fan-in range");
      if (l + 1 < weights.size() && weights[l + 1].front().size() != w.size())
        throw std::invalid_argument("layer dimensions do not chain");
    }
  }
};

inline BitMatrix load_bit_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  BitMatrix m;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<int> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stoi(cell));
    m.push_back(std::move(row));
  }
  if (m.empty()) throw std::runtime_error("empty matrix file " + path);
  return m;
}

inline BinaryNnModel load_binary_model(const std::string& weights_csv,
                                       const std::string& thresholds_path) {
  BinaryNnModel model;
  model.weights.push_back(load_bit_matrix_csv(weights_csv));
  std::ifstream in(thresholds_path);
  if (!in) throw std::runtime_error("cannot open " + thresholds_path);
  int t;
  while (in >> t) model.thresholds.push_back(t);
  if (model.thresholds.size() != model.weights.size())
    throw std::runtime_error("threshold count does not match layer count");
  model.validate();
  return model;
}

// ---------------------------------------------------------------------------
// Software reference for a single thresholded layer: per-neuron active-input
// counts, threshold bits, and the prediction rule. Prediction is the neuron
// with the largest pre-threshold activation (ties to the lowest index); when
// exactly one bit is set this is that bit's neuron, matching the in-array
// rule of reading the strongest output current.
struct ReferenceResult {
  std::vector<int> counts;
  std::vector<int> bits;
  int prediction = 0;
};

inline ReferenceResult reference_layer(const BitMatrix& weights, int threshold,
                                       const std::vector<int>& input_bits) {
  ReferenceResult r;
  r.counts.reserve(weights.size());
  for (const auto& row : weights) {
    if (row.size() != input_bits.size())
      throw std::invalid_argument("input width does not match weights");
    int k = 0;
    for (size_t c = 0; c < row.size(); ++c) k += row[c] & input_bits[c];
    r.counts.push_back(k);
    r.bits.push_back(k >= threshold ? 1 : 0);
  }
  r.prediction = 0;
  for (size_t j = 1; j < r.counts.size(); ++j)
    if (r.counts[j] > r.counts[static_cast<size_t>(r.prediction)])
      r.prediction = static_cast<int>(j);
  return r;
}

// ---------------------------------------------------------------------------
// Mapping a batch of binary images onto one subarray.

struct MnistRunReport {
  std::vector<int> predictions;
  std::vector<std::vector<int>> output_bits;  // per image, 10 bits
  int images_per_step = 0;
  int steps = 0;
  double energy_j = 0.0;
  double energy_per_image_j = 0.0;
  int k_threshold = 0;  // physical active-input threshold at this drive
};

// Replicates the model's weight rows into every row block of the subarray
// (each block serves one image slot of a step), then executes each image and
// reads its slot's rows. Energy is accounted per image over its own block.
// Wires default to ideal; v_dd selects the thresholding point.
inline MnistRunReport map_and_run(const BinaryNnModel& model,
                                  const std::vector<BinaryImage>& images,
                                  const SubarrayGeometry& geom_in, const LineConfiguration& cfg,
                                  double v_dd, const PcmCellParams& params = {},
                                  const ExecOptions& opt_in = {}) {
  model.validate();
  if (model.weights.size() != 1)
    throw std::invalid_argument("subarray mapping expects a single-layer model");
  const BitMatrix& w = model.weights.front();
  const int P = static_cast<int>(w.size());
  const int N = static_cast<int>(w.front().size());

  SubarrayGeometry geom = geom_in.resolved(cfg);
  if (N > geom.n_column) throw std::invalid_argument("model inputs exceed columns");
  if (P > geom.n_row) throw std::invalid_argument("model outputs exceed rows");
  const int images_per_step = geom.n_row / P;

  ExecOptions opt = opt_in;
  if (!opt.wires) opt.wires = WireModel::ideal();

  SubarrayState state = make_subarray_state(geom, cfg);
  for (int block = 0; block < images_per_step; ++block)
    for (int j = 0; j < P; ++j)
      for (int c = 0; c < N; ++c)
        state.top_cells[static_cast<size_t>(block * P + j)][static_cast<size_t>(c)] =
            w[static_cast<size_t>(j)][static_cast<size_t>(c)] ? Phase::Crystalline
                                                              : Phase::Amorphous;

  MnistRunReport rep;
  rep.images_per_step = images_per_step;
  rep.steps = images.empty()
                  ? 0
                  : static_cast<int>((images.size() + static_cast<size_t>(images_per_step) - 1) /
                                     static_cast<size_t>(images_per_step));
  rep.k_threshold = effective_threshold(v_dd, N, geom, cfg, params, geom.n_row - 1, opt.wires);

  for (size_t idx = 0; idx < images.size(); ++idx) {
    const BinaryImage& img = images[idx];
    std::vector<int> driven;
    for (int c = 0; c < N; ++c)
      if (img.bits[static_cast<size_t>(c)]) driven.push_back(c);
    const int block = static_cast<int>(idx % static_cast<size_t>(images_per_step));
    const int r0 = block * P;

    std::vector<int> bits(static_cast<size_t>(P), 0);
    int best = 0;
    double best_current = -1.0;
    double image_energy = 0.0;
    if (!driven.empty()) {
      DrivePattern d = DrivePattern::standard(geom.n_row, geom.n_column, driven, 0, v_dd,
                                              params.t_set);
      TmvmResult res = tmvm_execute(state, d, ExecMode::Analytic, params, opt);
      for (int j = 0; j < P; ++j) {
        const TmvmRecord& rec = res.trace.rows[static_cast<size_t>(r0 + j)];
        bits[static_cast<size_t>(j)] = rec.bit;
        image_energy += d.v_dd * rec.current_delivered * d.duration;
        // Highest output current wins, ties to the lowest neuron index.
        // Currents of neurons with distinct active-input counts differ by
        // >= ~1e-4 relative, while equal counts agree to rounding error, so
        // a 1e-9 relative guard makes the tie-break deterministic.
        if (rec.current_sustain > best_current * (1.0 + 1e-9) + 1e-30) {
          best_current = rec.current_sustain;
          best = j;
        }
      }
    }
    rep.output_bits.push_back(bits);
    rep.predictions.push_back(best);
    rep.energy_j += image_energy;
  }
  rep.energy_per_image_j = images.empty() ? 0.0 : rep.energy_j / static_cast<double>(images.size());
  return rep;
}

inline double evaluate_accuracy(const std::vector<int>& predictions,
                                const std::vector<int>& labels) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("prediction/label length mismatch");
  if (predictions.empty()) throw std::invalid_argument("empty evaluation set");
  int correct = 0;
  for (size_t i = 0; i < predictions.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

}  // namespace xbar
