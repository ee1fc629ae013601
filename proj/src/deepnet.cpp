#include "chestprog/deepnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "chestprog/error.hpp"

namespace chestprog::deepnet {

namespace {

std::string padding_name(Padding p) { return p == Padding::kSame ? "same" : "valid"; }

nlohmann::json shape_json(const Shape3& s) { return nlohmann::json::array({s.x, s.y, s.z}); }

Shape3 shape_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kFormat, "network shape must be [x, y, z]");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

int conv_extent(int in, int k, Padding p) { return p == Padding::kSame ? in : in - k + 1; }

}  // namespace

nlohmann::json to_json(const NetworkSpec& s) {
  return {{"input", shape_json(s.input)},
          {"in_channels", s.in_channels},
          {"conv_filters", s.conv_filters},
          {"kernel", shape_json(s.kernel)},
          {"padding", padding_name(s.padding)},
          {"pool", shape_json(s.pool)},
          {"fc_units", s.fc_units},
          {"activation", s.activation == ActivationPlan::kReluAll ? "relu_all" : "relu_first_only"},
          {"dropout", s.dropout}};
}

NetworkSpec network_spec_from_json(const nlohmann::json& j) {
  try {
    NetworkSpec s;
    s.input = shape_from(j.at("input"));
    s.in_channels = j.at("in_channels").get<int>();
    s.conv_filters = j.at("conv_filters").get<std::vector<int>>();
    s.kernel = shape_from(j.at("kernel"));
    const auto pad = j.at("padding").get<std::string>();
    if (pad != "same" && pad != "valid") throw Error(ErrorCode::kFormat, "unknown padding '" + pad + "'");
    s.padding = pad == "same" ? Padding::kSame : Padding::kValid;
    s.pool = shape_from(j.at("pool"));
    s.fc_units = j.at("fc_units").get<int>();
    const auto act = j.at("activation").get<std::string>();
    if (act != "relu_all" && act != "relu_first_only") throw Error(ErrorCode::kFormat, "unknown activation '" + act + "'");
    s.activation = act == "relu_all" ? ActivationPlan::kReluAll : ActivationPlan::kReluFirstOnly;
    s.dropout = j.at("dropout").get<double>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("bad network spec: ") + e.what());
  }
}

std::vector<ConvLayerShape> layer_shapes(const NetworkSpec& spec) {
  if (spec.in_channels < 1 || spec.fc_units < 1 || spec.conv_filters.empty())
    throw Error(ErrorCode::kInvalidArgument, "network needs input channels, conv layers and fc units");
  if (spec.kernel.x < 1 || spec.kernel.y < 1 || spec.kernel.z < 1 || spec.pool.x < 1 || spec.pool.y < 1 ||
      spec.pool.z < 1)
    throw Error(ErrorCode::kInvalidArgument, "kernel and pool extents must be positive");
  if (!(spec.dropout >= 0.0 && spec.dropout < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "dropout rate must lie in [0, 1)");
  std::vector<ConvLayerShape> out;
  Shape3 cur = spec.input;
  int channels = spec.in_channels;
  for (std::size_t l = 0; l < spec.conv_filters.size(); ++l) {
    ConvLayerShape s;
    s.in_channels = channels;
    s.out_channels = spec.conv_filters[l];
    if (s.out_channels < 1) throw Error(ErrorCode::kInvalidArgument, "conv filter count must be positive");
    s.in = cur;
    s.conv_out = {conv_extent(cur.x, spec.kernel.x, spec.padding), conv_extent(cur.y, spec.kernel.y, spec.padding),
                  conv_extent(cur.z, spec.kernel.z, spec.padding)};
    if (spec.padding == Padding::kSame)
      s.pad_front = {(spec.kernel.x - 1) / 2, (spec.kernel.y - 1) / 2, (spec.kernel.z - 1) / 2};
    if (s.conv_out.x < 1 || s.conv_out.y < 1 || s.conv_out.z < 1)
      throw Error(ErrorCode::kInvalidArgument, "conv layer " + std::to_string(l + 1) + " has empty output (input " +
                                                   std::to_string(cur.x) + "x" + std::to_string(cur.y) + "x" +
                                                   std::to_string(cur.z) + ")");
    // Axes shorter than the window are left unpooled.
    s.pool_window = {s.conv_out.x >= spec.pool.x ? spec.pool.x : 1, s.conv_out.y >= spec.pool.y ? spec.pool.y : 1,
                     s.conv_out.z >= spec.pool.z ? spec.pool.z : 1};
    s.pooled = {s.conv_out.x / s.pool_window.x, s.conv_out.y / s.pool_window.y, s.conv_out.z / s.pool_window.z};
    cur = s.pooled;
    channels = s.out_channels;
    out.push_back(s);
  }
  return out;
}

std::uint64_t parameter_count(const NetworkSpec& spec) {
  const auto shapes = layer_shapes(spec);
  const std::uint64_t k = static_cast<std::uint64_t>(spec.kernel.count());
  std::uint64_t n = 0;
  for (const auto& s : shapes)
    n += static_cast<std::uint64_t>(s.out_channels) * (static_cast<std::uint64_t>(s.in_channels) * k + 1);
  const auto& last = shapes.back();
  const std::uint64_t flat = static_cast<std::uint64_t>(last.out_channels) *
                             static_cast<std::uint64_t>(last.pooled.x) * static_cast<std::uint64_t>(last.pooled.y) *
                             static_cast<std::uint64_t>(last.pooled.z);
  const std::uint64_t fc = static_cast<std::uint64_t>(spec.fc_units);
  n += fc * (flat + 1);
  n += 2 * (fc + 1);
  return n;
}

template <typename T>
Sample<T> make_sample(const StudyRecord& study, const Shape3& input) {
  const Dims& d = study.volume().dims();
  if (input.x < 1 || input.y < 1 || input.z < 1 || d.x % input.x != 0 || d.y % input.y != 0 || d.z % input.z != 0)
    throw Error(ErrorCode::kDimensionMismatch, "study " + study.id() + " dims " + to_string(d) +
                                                   " are not a multiple of network input " + std::to_string(input.x) +
                                                   "x" + std::to_string(input.y) + "x" + std::to_string(input.z));
  const int fx = d.x / input.x, fy = d.y / input.y, fz = d.z / input.z;
  const double inv = 1.0 / static_cast<double>(fx * fy * fz);
  Sample<T> s;
  s.id = study.id();
  s.label = study.label();
  s.input = Tensor<T>::Zero(1 + static_cast<Eigen::Index>(kAnatomyCount), input.count());
  std::vector<double> acc(1 + kAnatomyCount);
  for (int k = 0; k < input.z; ++k)
    for (int j = 0; j < input.y; ++j)
      for (int i = 0; i < input.x; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int c = 0; c < fz; ++c)
          for (int b = 0; b < fy; ++b)
            for (int a = 0; a < fx; ++a) {
              const std::size_t idx = d.index(i * fx + a, j * fy + b, k * fz + c);
              acc[0] += study.volume()[idx] / 1000.0;
              for (std::size_t m = 0; m < kAnatomyCount; ++m) acc[m + 1] += study.masks()[m].test(idx) ? 1.0 : 0.0;
            }
        const Eigen::Index v = (static_cast<Eigen::Index>(k) * input.y + j) * input.x + i;
        for (std::size_t m = 0; m < acc.size(); ++m) s.input(static_cast<Eigen::Index>(m), v) = static_cast<T>(acc[m] * inv);
      }
  return s;
}

template <typename T>
Network<T>::Network(NetworkSpec spec) : spec_(std::move(spec)), shapes_(layer_shapes(spec_)) {
  const auto k = static_cast<std::size_t>(spec_.kernel.count());
  std::size_t at = 0;
  auto add = [&](int rows, int cols) {
    LayerView v;
    v.weight_offset = at;
    v.rows = rows;
    v.cols = cols;
    at += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    v.bias_offset = at;
    at += static_cast<std::size_t>(rows);
    views_.push_back(v);
  };
  for (const auto& s : shapes_) add(s.out_channels, s.in_channels * static_cast<int>(k));
  const auto& last = shapes_.back();
  add(spec_.fc_units, last.out_channels * last.pooled.count());
  add(2, spec_.fc_units);
  params_.assign(at, T(0));
}

template <typename T>
void Network<T>::initialize(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x6e657431u};
  std::mt19937_64 rng(seq);
  std::fill(params_.begin(), params_.end(), T(0));
  for (const auto& v : views_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(v.cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    const std::size_t n = static_cast<std::size_t>(v.rows) * static_cast<std::size_t>(v.cols);
    for (std::size_t i = 0; i < n; ++i) params_[v.weight_offset + i] = static_cast<T>(u(rng));
  }
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
void im2col(const Tensor<T>& x, const ConvLayerShape& s, const Shape3& k, Tensor<T>& col) {
  const Shape3 o = s.conv_out;
  const Shape3 in = s.in;
  col.resize(static_cast<Eigen::Index>(s.in_channels) * k.count(), o.count());
  Eigen::Index row = 0;
  for (int c = 0; c < s.in_channels; ++c) {
    const T* src = x.row(c).data();
    for (int kz = 0; kz < k.z; ++kz)
      for (int ky = 0; ky < k.y; ++ky)
        for (int kx = 0; kx < k.x; ++kx, ++row) {
          T* dst = col.row(row).data();
          const int dx = kx - s.pad_front[0];
          const int lo = std::max(0, -dx);
          const int hi = std::min(o.x, in.x - dx);
          for (int oz = 0; oz < o.z; ++oz) {
            const int iz = oz + kz - s.pad_front[2];
            for (int oy = 0; oy < o.y; ++oy) {
              T* line = dst + (static_cast<std::size_t>(oz) * o.y + oy) * o.x;
              const int iy = oy + ky - s.pad_front[1];
              if (iz < 0 || iz >= in.z || iy < 0 || iy >= in.y || lo >= hi) {
                std::fill(line, line + o.x, T(0));
                continue;
              }
              const T* sline = src + (static_cast<std::size_t>(iz) * in.y + iy) * in.x;
              std::fill(line, line + lo, T(0));
              for (int ox = lo; ox < hi; ++ox) line[ox] = sline[ox + dx];
              std::fill(line + std::max(lo, hi), line + o.x, T(0));
            }
          }
        }
  }
}

template <typename T>
void col2im(const Tensor<T>& col, const ConvLayerShape& s, const Shape3& k, Tensor<T>& dx) {
  const Shape3 o = s.conv_out;
  const Shape3 in = s.in;
  dx = Tensor<T>::Zero(s.in_channels, in.count());
  Eigen::Index row = 0;
  for (int c = 0; c < s.in_channels; ++c) {
    T* dst = dx.row(c).data();
    for (int kz = 0; kz < k.z; ++kz)
      for (int ky = 0; ky < k.y; ++ky)
        for (int kx = 0; kx < k.x; ++kx, ++row) {
          const T* src = col.row(row).data();
          const int ddx = kx - s.pad_front[0];
          const int lo = std::max(0, -ddx);
          const int hi = std::min(o.x, in.x - ddx);
          if (lo >= hi) continue;
          for (int oz = 0; oz < o.z; ++oz) {
            const int iz = oz + kz - s.pad_front[2];
            if (iz < 0 || iz >= in.z) continue;
            for (int oy = 0; oy < o.y; ++oy) {
              const int iy = oy + ky - s.pad_front[1];
              if (iy < 0 || iy >= in.y) continue;
              const T* line = src + (static_cast<std::size_t>(oz) * o.y + oy) * o.x;
              T* dline = dst + (static_cast<std::size_t>(iz) * in.y + iy) * in.x;
              for (int ox = lo; ox < hi; ++ox) dline[ox + ddx] += line[ox];
            }
          }
        }
  }
}

template <typename T>
void max_pool(const Tensor<T>& act, const ConvLayerShape& s, Tensor<T>& pooled, std::vector<int>& argmax) {
  const Shape3 o = s.conv_out, p = s.pooled, w = s.pool_window;
  pooled.resize(act.rows(), p.count());
  argmax.resize(static_cast<std::size_t>(act.rows()) * static_cast<std::size_t>(p.count()));
  for (Eigen::Index c = 0; c < act.rows(); ++c) {
    const T* src = act.row(c).data();
    for (int pz = 0; pz < p.z; ++pz)
      for (int py = 0; py < p.y; ++py)
        for (int px = 0; px < p.x; ++px) {
          int best = -1;
          T val = -std::numeric_limits<T>::infinity();
          for (int a = 0; a < w.z; ++a)
            for (int b = 0; b < w.y; ++b)
              for (int e = 0; e < w.x; ++e) {
                const int idx = ((pz * w.z + a) * o.y + (py * w.y + b)) * o.x + px * w.x + e;
                if (best < 0 || src[idx] > val) {
                  best = idx;
                  val = src[idx];
                }
              }
          const int q = (pz * p.y + py) * p.x + px;
          pooled(c, q) = val;
          argmax[static_cast<std::size_t>(c) * static_cast<std::size_t>(p.count()) + static_cast<std::size_t>(q)] = best;
        }
  }
}

template <typename T>
void draw_dropout(std::mt19937_64& rng, double rate, Eigen::Index rows, Eigen::Index cols, Tensor<T>& mask) {
  mask.resize(rows, cols);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = u(rng) < rate ? T(0) : keep_scale;
}

}  // namespace

template <typename T>
std::array<T, 2> Network<T>::forward(const Tensor<T>& input, Workspace<T>& ws, std::mt19937_64* dropout_rng) const {
  if (input.rows() != spec_.in_channels || input.cols() != spec_.input.count())
    throw Error(ErrorCode::kDimensionMismatch, "network input is " + std::to_string(input.rows()) + " x " +
                                                   std::to_string(input.cols()) + ", expected " +
                                                   std::to_string(spec_.in_channels) + " x " +
                                                   std::to_string(spec_.input.count()));
  const bool drop = dropout_rng != nullptr && spec_.dropout > 0.0;
  ws.conv.resize(shapes_.size());
  const Tensor<T>* x = &input;
  for (std::size_t l = 0; l < shapes_.size(); ++l) {
    const auto& s = shapes_[l];
    auto& L = ws.conv[l];
    const auto& v = views_[l];
    Eigen::Map<const RowMat<T>> w(params_.data() + v.weight_offset, v.rows, v.cols);
    Eigen::Map<const Vec<T>> b(params_.data() + v.bias_offset, v.rows);
    im2col(*x, s, spec_.kernel, L.col);
    L.pre.noalias() = w * L.col;
    L.pre.colwise() += b;
    L.relu = l == 0 || spec_.activation == ActivationPlan::kReluAll;
    L.act = L.relu ? Tensor<T>(L.pre.cwiseMax(T(0))) : L.pre;
    max_pool(L.act, s, L.pooled, L.argmax);
    if (drop) {
      draw_dropout(*dropout_rng, spec_.dropout, L.pooled.rows(), L.pooled.cols(), L.drop);
      L.pooled.array() *= L.drop.array();
    } else {
      L.drop.resize(0, 0);
    }
    x = &L.pooled;
  }
  ws.flat = Eigen::Map<const Vec<T>>(x->data(), x->size());

  const auto& vf = views_[shapes_.size()];
  Eigen::Map<const RowMat<T>> wf(params_.data() + vf.weight_offset, vf.rows, vf.cols);
  Eigen::Map<const Vec<T>> bf(params_.data() + vf.bias_offset, vf.rows);
  ws.fc_pre.noalias() = wf * ws.flat;
  ws.fc_pre += bf;
  ws.fc_relu = spec_.activation == ActivationPlan::kReluAll;
  ws.fc_act = ws.fc_relu ? Vec<T>(ws.fc_pre.cwiseMax(T(0))) : ws.fc_pre;
  if (drop) {
    Tensor<T> m;
    draw_dropout(*dropout_rng, spec_.dropout, ws.fc_act.size(), 1, m);
    ws.fc_drop = Eigen::Map<const Vec<T>>(m.data(), m.size());
    ws.fc_act.array() *= ws.fc_drop.array();
  } else {
    ws.fc_drop.resize(0);
  }

  const auto& vo = views_[shapes_.size() + 1];
  Eigen::Map<const RowMat<T>> wo(params_.data() + vo.weight_offset, vo.rows, vo.cols);
  Eigen::Map<const Vec<T>> bo(params_.data() + vo.bias_offset, vo.rows);
  ws.logits.noalias() = wo * ws.fc_act;
  ws.logits += bo;
  const T m = std::max(ws.logits(0), ws.logits(1));
  const T e0 = std::exp(ws.logits(0) - m), e1 = std::exp(ws.logits(1) - m);
  const T z = e0 + e1;
  ws.probs = {e0 / z, e1 / z};
  return ws.probs;
}

template <typename T>
std::array<T, 2> Network<T>::predict(const Tensor<T>& input) const {
  Workspace<T> ws;
  return forward(input, ws, nullptr);
}

template <typename T>
void Network<T>::backward(Workspace<T>& ws, int label, std::span<T> grad) const {
  if (grad.size() != params_.size())
    throw Error(ErrorCode::kDimensionMismatch, "gradient buffer size does not match the network");
  if (ws.conv.size() != shapes_.size()) throw Error(ErrorCode::kInvalidArgument, "backward needs a cached forward pass");
  // softmax - onehot. Equals the clamped-loss gradient while p is inside the clamp; beyond it
  // the clamp is flat, and a saturated wrong prediction would otherwise never recover.
  Vec<T> dlogits(2);
  dlogits(0) = ws.probs[0] - static_cast<T>(label == 0 ? 1 : 0);
  dlogits(1) = ws.probs[1] - static_cast<T>(label == 1 ? 1 : 0);

  const auto& vo = views_[shapes_.size() + 1];
  Eigen::Map<const RowMat<T>> wo(params_.data() + vo.weight_offset, vo.rows, vo.cols);
  Eigen::Map<RowMat<T>>(grad.data() + vo.weight_offset, vo.rows, vo.cols).noalias() = dlogits * ws.fc_act.transpose();
  Eigen::Map<Vec<T>>(grad.data() + vo.bias_offset, vo.rows) = dlogits;
  Vec<T> dh = wo.transpose() * dlogits;
  if (ws.fc_drop.size() > 0) dh.array() *= ws.fc_drop.array();
  if (ws.fc_relu)
    for (Eigen::Index i = 0; i < dh.size(); ++i)
      if (!(ws.fc_pre(i) > T(0))) dh(i) = T(0);

  const auto& vf = views_[shapes_.size()];
  Eigen::Map<const RowMat<T>> wf(params_.data() + vf.weight_offset, vf.rows, vf.cols);
  Eigen::Map<RowMat<T>>(grad.data() + vf.weight_offset, vf.rows, vf.cols).noalias() = dh * ws.flat.transpose();
  Eigen::Map<Vec<T>>(grad.data() + vf.bias_offset, vf.rows) = dh;
  Vec<T> dflat = wf.transpose() * dh;

  const auto& last = shapes_.back();
  Tensor<T> dpooled = Eigen::Map<const Tensor<T>>(dflat.data(), last.out_channels, last.pooled.count());
  Tensor<T> dpre, dcol, dx;
  for (std::size_t li = shapes_.size(); li-- > 0;) {
    const auto& s = shapes_[li];
    const auto& L = ws.conv[li];
    const auto& v = views_[li];
    if (L.drop.size() > 0) dpooled.array() *= L.drop.array();
    dpre = Tensor<T>::Zero(s.out_channels, s.conv_out.count());
    const std::size_t pc = static_cast<std::size_t>(s.pooled.count());
    for (int c = 0; c < s.out_channels; ++c)
      for (std::size_t q = 0; q < pc; ++q)
        dpre(c, L.argmax[static_cast<std::size_t>(c) * pc + q]) += dpooled(c, static_cast<Eigen::Index>(q));
    if (L.relu) dpre = (L.pre.array() > T(0)).select(dpre, T(0));
    Eigen::Map<RowMat<T>>(grad.data() + v.weight_offset, v.rows, v.cols).noalias() = dpre * L.col.transpose();
    Eigen::Map<Vec<T>>(grad.data() + v.bias_offset, v.rows) = dpre.rowwise().sum();
    if (li == 0) break;
    Eigen::Map<const RowMat<T>> w(params_.data() + v.weight_offset, v.rows, v.cols);
    dcol.noalias() = w.transpose() * dpre;
    col2im(dcol, s, spec_.kernel, dx);
    dpooled.swap(dx);
  }
}

double bce_loss(double p, int label) {
  const double q = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return label == 1 ? -std::log(q) : -std::log(1.0 - q);
}

template class Network<float>;
template class Network<double>;
template Sample<float> make_sample<float>(const StudyRecord&, const Shape3&);
template Sample<double> make_sample<double>(const StudyRecord&, const Shape3&);

}  // namespace chestprog::deepnet
