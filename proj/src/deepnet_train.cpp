#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "chestprog/deepnet.hpp"
#include "chestprog/error.hpp"
#include "chestprog/parallel.hpp"
#include "chestprog/text_format.hpp"

namespace chestprog::deepnet {

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j = {{"epochs", c.epochs},
                      {"batch_size", c.batch_size},
                      {"lr_initial", c.lr_initial},
                      {"lr_final", c.lr_final},
                      {"lr_hold_until", c.lr_hold_until},
                      {"lr_final_from", c.lr_final_from},
                      {"rho", c.rho},
                      {"epsilon", c.epsilon},
                      {"seed", c.seed},
                      {"stop_when_train_perfect", c.stop_when_train_perfect}};
  j["dropout"] = c.dropout ? nlohmann::json(*c.dropout) : nlohmann::json(nullptr);
  return j;
}

double learning_rate(const TrainConfig& cfg, int epoch) {
  if (epoch <= cfg.lr_hold_until) return cfg.lr_initial;
  if (epoch >= cfg.lr_final_from) return cfg.lr_final;
  const double t = static_cast<double>(epoch - cfg.lr_hold_until) / static_cast<double>(cfg.lr_final_from - cfg.lr_hold_until);
  return std::exp(std::log(cfg.lr_initial) + t * (std::log(cfg.lr_final) - std::log(cfg.lr_initial)));
}

template <typename T>
void rmsprop_step(std::span<T> params, std::span<const T> grad, RmsState<T>& state, double lr, double rho,
                  double eps) {
  if (grad.size() != params.size()) throw Error(ErrorCode::kDimensionMismatch, "gradient size differs from parameters");
  if (state.mean_square.size() != params.size()) state.mean_square.assign(params.size(), T(0));
  const T r = static_cast<T>(rho), one_minus = static_cast<T>(1.0 - rho), e = static_cast<T>(eps), step = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    T& a = state.mean_square[i];
    a = r * a + one_minus * grad[i] * grad[i];
    params[i] -= step * grad[i] / std::sqrt(a + e);
  }
}

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32), tag};
  return std::mt19937_64(seq);
}

constexpr std::uint32_t kShuffleTag = 0x73687566u;
constexpr std::uint32_t kDropoutTag = 0x64726f70u;

}  // namespace

template <typename T>
TrainResult<T> train(const NetworkSpec& spec, const std::vector<Sample<T>>& data, const TrainConfig& cfg) {
  if (data.empty()) throw Error(ErrorCode::kEmptyData, "deepnet training set is empty");
  const auto positives = std::count_if(data.begin(), data.end(), [](const Sample<T>& s) { return s.label == 1; });
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(data.size()))
    throw Error(ErrorCode::kSingleClass, "deepnet training needs at least one study per class");
  if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.lr_final_from <= cfg.lr_hold_until || cfg.lr_initial <= 0.0 ||
      cfg.lr_final <= 0.0)
    throw Error(ErrorCode::kInvalidArgument, "invalid deepnet training configuration");

  NetworkSpec s = spec;
  if (cfg.dropout) s.dropout = *cfg.dropout;
  TrainResult<T> out;
  out.net = Network<T>(s);
  out.net.initialize(cfg.seed);
  auto& net = out.net;
  const std::size_t n = data.size(), np = net.size();
  out.optimizer.mean_square.assign(np, T(0));

  const std::size_t slots = std::min<std::size_t>(n, static_cast<std::size_t>(cfg.batch_size));
  std::vector<Workspace<T>> ws(slots);
  std::vector<std::vector<T>> grads(slots, std::vector<T>(np));
  std::vector<double> losses(n);
  std::vector<T> total(np);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = learning_rate(cfg, epoch);
    auto shuffle_rng = stream(cfg.seed, static_cast<std::uint64_t>(epoch), 0, kShuffleTag);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += slots) {
      const std::size_t count = std::min(slots, n - start);
      parallel_for(count, cfg.threads, [&](std::size_t i) {
        const std::size_t sample = order[start + i];
        auto rng = stream(cfg.seed, static_cast<std::uint64_t>(epoch), sample, kDropoutTag);
        const auto probs = net.forward(data[sample].input, ws[i], &rng);
        losses[start + i] = bce_loss(static_cast<double>(probs[1]), data[sample].label);
        net.backward(ws[i], data[sample].label, grads[i]);
      });
      std::fill(total.begin(), total.end(), T(0));
      for (std::size_t i = 0; i < count; ++i) {
        const double l = losses[start + i];
        if (!std::isfinite(l))
          throw Error(ErrorCode::kNonFinite, "non-finite loss at epoch " + std::to_string(epoch) + " on study '" +
                                                 data[order[start + i]].id + "'");
        loss_sum += l;
        for (std::size_t p = 0; p < np; ++p) total[p] += grads[i][p];
      }
      const T scale = static_cast<T>(1.0 / static_cast<double>(count));
      for (auto& g : total) g *= scale;
      if (!std::all_of(total.begin(), total.end(), [](T g) { return std::isfinite(static_cast<double>(g)); }))
        throw Error(ErrorCode::kNonFinite, "non-finite gradient at epoch " + std::to_string(epoch));
      rmsprop_step<T>(net.parameters(), total, out.optimizer, lr, cfg.rho, cfg.epsilon);
    }

    // Dropout-free pass over the training set.
    std::vector<double> eval(n);
    std::vector<int> correct(n);
    for (std::size_t start = 0; start < n; start += slots) {
      const std::size_t count = std::min(slots, n - start);
      parallel_for(count, cfg.threads, [&](std::size_t i) {
        const auto& smp = data[start + i];
        const auto probs = net.forward(smp.input, ws[i], nullptr);
        eval[start + i] = bce_loss(static_cast<double>(probs[1]), smp.label);
        correct[start + i] = ((probs[1] >= T(0.5)) ? 1 : 0) == smp.label ? 1 : 0;
      });
    }
    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.mean_loss = loss_sum / static_cast<double>(n);
    log.eval_loss = std::accumulate(eval.begin(), eval.end(), 0.0) / static_cast<double>(n);
    log.train_accuracy = static_cast<double>(std::accumulate(correct.begin(), correct.end(), 0)) / static_cast<double>(n);
    out.log.push_back(log);
    if (cfg.stop_when_train_perfect && log.train_accuracy == 1.0) break;
  }
  return out;
}

void write_epoch_log(const std::vector<EpochLog>& log, const std::filesystem::path& csv) {
  std::ofstream os(csv, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + csv.string());
  os << "epoch,lr,mean_loss,eval_loss,train_accuracy\n";
  for (const auto& e : log)
    os << e.epoch << ',' << format_double(e.lr) << ',' << format_double(e.mean_loss) << ','
       << format_double(e.eval_loss) << ',' << format_double(e.train_accuracy) << '\n';
  if (!os) throw Error(ErrorCode::kIo, "failed writing " + csv.string());
}

namespace {

constexpr char kMagic[8] = {'C', 'P', 'N', 'E', 'T', '0', '0', '1'};

template <typename U>
void put_le(std::ostream& os, U v) {
  unsigned char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), sizeof(U));
}

template <typename U>
U get_le(std::istream& is, const std::string& what) {
  unsigned char b[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(U))) throw Error(ErrorCode::kTruncatedPayload, "network file truncated in " + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

template <typename T>
using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

template <typename T>
void put_values(std::ostream& os, std::span<const T> v) {
  put_le<std::uint64_t>(os, v.size());
  for (T x : v) put_le<Bits<T>>(os, std::bit_cast<Bits<T>>(x));
}

template <typename T>
std::vector<T> get_values(std::istream& is, const std::string& what) {
  const auto n = get_le<std::uint64_t>(is, what);
  std::vector<T> v;
  v.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 26)));
  for (std::uint64_t i = 0; i < n; ++i) v.push_back(std::bit_cast<T>(get_le<Bits<T>>(is, what)));
  return v;
}

}  // namespace

template <typename T>
void write_network(const std::filesystem::path& path, const Network<T>& net, const RmsState<T>& opt,
                   const nlohmann::json& meta) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  nlohmann::json j = meta;
  j["spec"] = to_json(net.spec());
  const std::string text = j.dump();
  os.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(os, sizeof(T));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_values<T>(os, net.parameters());
  put_values<T>(os, opt.mean_square);
  if (!os) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

template <typename T>
Network<T> read_network(const std::filesystem::path& path, RmsState<T>* opt, nlohmann::json* meta) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw Error(ErrorCode::kMalformedHeader, path.string() + " is not a chestprog network file");
  const auto scalar = get_le<std::uint32_t>(is, "header");
  if (scalar != sizeof(T))
    throw Error(ErrorCode::kFormat, path.string() + " stores " + std::to_string(scalar * 8) + "-bit parameters");
  const auto len = get_le<std::uint32_t>(is, "header");
  std::string text(len, '\0');
  if (!is.read(text.data(), len)) throw Error(ErrorCode::kTruncatedPayload, "network file truncated in header");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, std::string("bad network header: ") + e.what());
  }
  Network<T> net(network_spec_from_json(j.at("spec")));
  auto params = get_values<T>(is, "parameters");
  if (params.size() != net.size())
    throw Error(ErrorCode::kPayloadMismatch, "network file holds " + std::to_string(params.size()) +
                                                 " parameters, spec needs " + std::to_string(net.size()));
  std::copy(params.begin(), params.end(), net.parameters().begin());
  auto state = get_values<T>(is, "optimizer state");
  if (!state.empty() && state.size() != net.size())
    throw Error(ErrorCode::kPayloadMismatch, "optimizer state size does not match the network");
  if (is.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::kPayloadMismatch, "trailing bytes in " + path.string());
  if (opt) opt->mean_square = std::move(state);
  if (meta) *meta = std::move(j);
  return net;
}

template void rmsprop_step<float>(std::span<float>, std::span<const float>, RmsState<float>&, double, double, double);
template void rmsprop_step<double>(std::span<double>, std::span<const double>, RmsState<double>&, double, double,
                                   double);
template TrainResult<float> train<float>(const NetworkSpec&, const std::vector<Sample<float>>&, const TrainConfig&);
template TrainResult<double> train<double>(const NetworkSpec&, const std::vector<Sample<double>>&, const TrainConfig&);
template void write_network<float>(const std::filesystem::path&, const Network<float>&, const RmsState<float>&,
                                   const nlohmann::json&);
template void write_network<double>(const std::filesystem::path&, const Network<double>&, const RmsState<double>&,
                                    const nlohmann::json&);
template Network<float> read_network<float>(const std::filesystem::path&, RmsState<float>*, nlohmann::json*);
template Network<double> read_network<double>(const std::filesystem::path&, RmsState<double>*, nlohmann::json*);

}  // namespace chestprog::deepnet
