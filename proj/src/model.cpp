#include "ciphernmt/model.hpp"

#include <algorithm>
#include <cmath>

#include "ciphernmt/errors.hpp"

namespace ciphernmt {

ModelConfig ModelConfig::iwslt() {
  ModelConfig c;
  c.layers = 6;
  c.heads = 4;
  c.embed_dim = 512;
  c.ffn_dim = 1024;
  c.dropout = 0.3;
  c.attention_dropout = 0.1;
  c.max_len = 512;
  return c;
}

void ModelConfig::validate() const {
  if (layers < 1) throw DataError("model: layers must be >= 1");
  if (heads < 1 || embed_dim % heads != 0)
    throw DataError("model: embed_dim must be divisible by heads");
  if (dropout < 0.0 || dropout >= 1.0 || attention_dropout < 0.0 || attention_dropout >= 1.0)
    throw DataError("model: dropout must be in [0, 1)");
  if (vocab_size <= 0) throw DataError("model: vocab_size must be positive");
  if (max_len < 2) throw DataError("model: max_len must be >= 2");
}

template <class T>
int ParamStore<T>::add(const std::string& name, int rows, int cols) {
  names.push_back(name);
  values.push_back(MatX<T>::Zero(rows, cols));
  grads.push_back(MatX<T>::Zero(rows, cols));
  by_name[name] = static_cast<int>(names.size()) - 1;
  return static_cast<int>(names.size()) - 1;
}

template <class T>
int ParamStore<T>::find(const std::string& name) const {
  auto it = by_name.find(name);
  return it == by_name.end() ? -1 : it->second;
}

template <class T>
MatX<T>& ParamStore<T>::value(const std::string& name) {
  const int i = find(name);
  if (i < 0) throw DataError("unknown parameter: " + name);
  return values[i];
}

template <class T>
const MatX<T>& ParamStore<T>::value(const std::string& name) const {
  const int i = find(name);
  if (i < 0) throw DataError("unknown parameter: " + name);
  return values[i];
}

template <class T>
void ParamStore<T>::zero_grads() {
  for (auto& g : grads) g.setZero();
}

template <class T>
int64_t ParamStore<T>::param_count() const {
  int64_t n = 0;
  for (const auto& v : values) n += v.size();
  return n;
}

template <class T>
bool ParamStore<T>::all_finite() const {
  for (const auto& v : values)
    if (!v.allFinite()) return false;
  return true;
}

template <class T>
T ParamStore<T>::max_abs_diff(const ParamStore<T>& other) const {
  T m = T(0);
  for (size_t i = 0; i < values.size(); ++i)
    m = std::max(m, (values[i] - other.values[i]).cwiseAbs().maxCoeff());
  return m;
}

namespace {

// Parameter layout is fixed by construction order; checkpoints replay it.
template <class T>
ParamStore<T> init_params(const ModelConfig& cfg) {
  ParamStore<T> p;
  const int d = cfg.embed_dim;
  const int f = cfg.ffn_dim;
  const int v = cfg.vocab_size;

  p.add("enc_embed", v, d);
  p.add("dec_embed", v, d);
  for (int side = 0; side < 2; ++side) {
    const std::string s = side == 0 ? "enc" : "dec";
    for (int l = 0; l < cfg.layers; ++l) {
      const std::string base = s + std::to_string(l);
      const int blocks = side == 0 ? 1 : 2;  // decoder adds cross attention
      for (int b = 0; b < blocks; ++b) {
        const std::string att = base + (b == 0 ? ".self" : ".cross");
        for (const char* w : {".wq", ".wk", ".wv", ".wo"}) p.add(att + w, d, d);
        for (const char* w : {".bq", ".bk", ".bv", ".bo"}) p.add(att + w, 1, d);
        p.add(att + ".ln_g", 1, d);
        p.add(att + ".ln_b", 1, d);
      }
      p.add(base + ".ffn.w1", d, f);
      p.add(base + ".ffn.b1", 1, f);
      p.add(base + ".ffn.w2", f, d);
      p.add(base + ".ffn.b2", 1, d);
      p.add(base + ".ffn.ln_g", 1, d);
      p.add(base + ".ffn.ln_b", 1, d);
    }
  }
  if (!cfg.tie_output) p.add("out_proj", v, d);

  // draws in double so float/double instantiations share the init sequence
  Rng rng(cfg.seed);
  for (size_t i = 0; i < p.names.size(); ++i) {
    const std::string& name = p.names[i];
    MatX<T>& m = p.values[i];
    if (name.find(".ln_g") != std::string::npos) {
      m.setOnes();
    } else if (name.find(".b") != std::string::npos || name.find(".ln_b") != std::string::npos) {
      m.setZero();
    } else if (name == "enc_embed" || name == "dec_embed") {
      const double std = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
          m(r, c) = static_cast<T>(rng.gaussian() * std);
    } else {
      const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
          m(r, c) = static_cast<T>((rng.uniform() * 2.0 - 1.0) * bound);
    }
  }
  return p;
}

}  // namespace

template <class T>
TransformerModel<T>::TransformerModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  params_ = init_params<T>(cfg_);
}

template <class T>
TransformerModel<T>::TransformerModel(const ModelConfig& cfg, ParamStore<T> params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
}

template <class T>
MatX<T> TransformerModel<T>::positional(int len) const {
  const int d = cfg_.embed_dim;
  MatX<T> pe(len, d);
  for (int pos = 0; pos < len; ++pos) {
    for (int i = 0; i < d; i += 2) {
      const double angle = pos / std::pow(10000.0, static_cast<double>(i) / d);
      pe(pos, i) = static_cast<T>(std::sin(angle));
      if (i + 1 < d) pe(pos, i + 1) = static_cast<T>(std::cos(angle));
    }
  }
  return pe;
}

template <class T>
int TransformerModel<T>::param_node(Tape<T>& tape, const std::string& name,
                                    std::unordered_map<std::string, int>& pids) const {
  auto it = pids.find(name);
  if (it != pids.end()) return it->second;
  const int idx = params_.find(name);
  if (idx < 0) throw DataError("unknown parameter: " + name);
  // params_ is conceptually const during a forward pass; gradients flow into
  // the store's grad buffers
  auto* self = const_cast<TransformerModel<T>*>(this);
  const int id = tape.param(&self->params_.values[idx], &self->params_.grads[idx]);
  pids[name] = id;
  return id;
}

template <class T>
int TransformerModel<T>::attention(Tape<T>& tape, int q_in, int kv_in, const std::string& prefix,
                                   bool causal, bool training, Rng* rng,
                                   std::unordered_map<std::string, int>& pids) const {
  const int d = cfg_.embed_dim;
  const int dh = d / cfg_.heads;
  const int q = tape.add_rowvec(tape.matmul(q_in, param_node(tape, prefix + ".wq", pids)),
                                param_node(tape, prefix + ".bq", pids));
  const int k = tape.add_rowvec(tape.matmul(kv_in, param_node(tape, prefix + ".wk", pids)),
                                param_node(tape, prefix + ".bk", pids));
  const int v = tape.add_rowvec(tape.matmul(kv_in, param_node(tape, prefix + ".wv", pids)),
                                param_node(tape, prefix + ".bv", pids));

  int mask = -1;
  if (causal) {
    const Eigen::Index n = tape.val(q).rows();
    MatX<T> m = MatX<T>::Zero(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = r + 1; c < n; ++c) m(r, c) = T(-1e9);
    mask = tape.constant(std::move(m));
  }

  std::vector<int> heads;
  heads.reserve(cfg_.heads);
  const T inv_sqrt_dh = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dh)));
  for (int h = 0; h < cfg_.heads; ++h) {
    const int qh = tape.slice_cols(q, h * dh, dh);
    const int kh = tape.slice_cols(k, h * dh, dh);
    const int vh = tape.slice_cols(v, h * dh, dh);
    int scores = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt_dh);
    if (mask >= 0) scores = tape.add(scores, mask);
    int attn = tape.softmax_rows(scores);
    if (training && rng && cfg_.attention_dropout > 0)
      attn = tape.dropout(attn, static_cast<T>(cfg_.attention_dropout), *rng);
    heads.push_back(tape.matmul(attn, vh));
  }
  const int cat = tape.concat_cols(heads);
  return tape.add_rowvec(tape.matmul(cat, param_node(tape, prefix + ".wo", pids)),
                         param_node(tape, prefix + ".bo", pids));
}

template <class T>
typename TransformerModel<T>::ForwardResult TransformerModel<T>::forward(
    Tape<T>& tape, const std::vector<int>& src, const std::vector<int>& tgt_in, bool training,
    Rng* dropout_rng, bool trace_encoder) const {
  if (tgt_in.empty()) throw DataError("forward: empty target input");
  std::vector<int> src_full = src;
  src_full.push_back(Vocab::kEos);
  if (static_cast<int>(src_full.size()) > cfg_.max_len ||
      static_cast<int>(tgt_in.size()) > cfg_.max_len)
    throw DataError("forward: sequence exceeds max_len (" + std::to_string(cfg_.max_len) + ")");
  for (int t : src_full)
    if (t < 0 || t >= cfg_.vocab_size)
      throw DataError("forward: source token id out of range: " + std::to_string(t));
  for (int t : tgt_in)
    if (t < 0 || t >= cfg_.vocab_size)
      throw DataError("forward: target token id out of range: " + std::to_string(t));

  std::unordered_map<std::string, int> pids;
  const T eps = static_cast<T>(1e-5);
  const T embed_scale = static_cast<T>(std::sqrt(static_cast<double>(cfg_.embed_dim)));
  const T drop = static_cast<T>(cfg_.dropout);
  Rng* rng = training ? dropout_rng : nullptr;
  ForwardResult out;

  auto drop_node = [&](int x) { return (rng && drop > 0) ? tape.dropout(x, drop, *rng) : x; };

  // encoder
  int x = tape.scale(tape.rows_gather(param_node(tape, "enc_embed", pids), src_full),
                     embed_scale);
  x = tape.add(x, tape.constant(positional(static_cast<int>(src_full.size()))));
  x = drop_node(x);
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string base = "enc" + std::to_string(l);
    int h = attention(tape, x, x, base + ".self", false, training, rng, pids);
    x = tape.layer_norm(tape.add(x, drop_node(h)), param_node(tape, base + ".self.ln_g", pids),
                        param_node(tape, base + ".self.ln_b", pids), eps);
    int f = tape.add_rowvec(tape.matmul(x, param_node(tape, base + ".ffn.w1", pids)),
                            param_node(tape, base + ".ffn.b1", pids));
    f = tape.relu(f);
    f = tape.add_rowvec(tape.matmul(f, param_node(tape, base + ".ffn.w2", pids)),
                        param_node(tape, base + ".ffn.b2", pids));
    x = tape.layer_norm(tape.add(x, drop_node(f)), param_node(tape, base + ".ffn.ln_g", pids),
                        param_node(tape, base + ".ffn.ln_b", pids), eps);
    if (trace_encoder) out.enc_layers.push_back(tape.val(x));
  }
  const int enc_out = x;

  // decoder
  int y = tape.scale(tape.rows_gather(param_node(tape, "dec_embed", pids), tgt_in), embed_scale);
  y = tape.add(y, tape.constant(positional(static_cast<int>(tgt_in.size()))));
  y = drop_node(y);
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string base = "dec" + std::to_string(l);
    int h = attention(tape, y, y, base + ".self", true, training, rng, pids);
    y = tape.layer_norm(tape.add(y, drop_node(h)), param_node(tape, base + ".self.ln_g", pids),
                        param_node(tape, base + ".self.ln_b", pids), eps);
    int c = attention(tape, y, enc_out, base + ".cross", false, training, rng, pids);
    y = tape.layer_norm(tape.add(y, drop_node(c)), param_node(tape, base + ".cross.ln_g", pids),
                        param_node(tape, base + ".cross.ln_b", pids), eps);
    int f = tape.add_rowvec(tape.matmul(y, param_node(tape, base + ".ffn.w1", pids)),
                            param_node(tape, base + ".ffn.b1", pids));
    f = tape.relu(f);
    f = tape.add_rowvec(tape.matmul(f, param_node(tape, base + ".ffn.w2", pids)),
                        param_node(tape, base + ".ffn.b2", pids));
    y = tape.layer_norm(tape.add(y, drop_node(f)), param_node(tape, base + ".ffn.ln_g", pids),
                        param_node(tape, base + ".ffn.ln_b", pids), eps);
  }

  const std::string out_name = cfg_.tie_output ? "dec_embed" : "out_proj";
  out.logits = tape.matmul_nt(y, param_node(tape, out_name, pids));
  return out;
}

template <class T>
std::vector<int> TransformerModel<T>::teacher_input(const std::vector<int>& tgt) {
  std::vector<int> in;
  in.reserve(tgt.size() + 1);
  in.push_back(Vocab::kBos);
  in.insert(in.end(), tgt.begin(), tgt.end());
  return in;
}

template <class T>
std::vector<int> TransformerModel<T>::teacher_output(const std::vector<int>& tgt) {
  std::vector<int> out = tgt;
  out.push_back(Vocab::kEos);
  return out;
}

template <class T>
double TransformerModel<T>::sentence_nll(const std::vector<int>& src,
                                         const std::vector<int>& tgt) const {
  Tape<T> tape;
  tape.recording = false;
  const auto tgt_in = teacher_input(tgt);
  const auto tgt_out = teacher_output(tgt);
  const auto fwd = forward(tape, src, tgt_in, false, nullptr);
  const MatX<T>& z = tape.val(fwd.logits);
  double total = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const auto row = z.row(r).array();
    const T mx = row.maxCoeff();
    const T lse = mx + std::log((row - mx).exp().sum());
    total += static_cast<double>(lse - z(r, tgt_out[r]));
  }
  return total / static_cast<double>(tgt_out.size());
}

namespace {
template <class T>
struct Hypothesis {
  std::vector<int> tokens;
  double logp = 0.0;
  bool is_greedy = false;
};
}  // namespace

template <class T>
std::vector<int> TransformerModel<T>::decode(const std::vector<int>& src,
                                             const DecodeConfig& dc) const {
  if (dc.beam < 1) throw DataError("beam size must be >= 1");
  const int max_len = std::min(dc.max_len, cfg_.max_len - 1);
  const auto norm = [&](double logp, size_t len) {
    return logp / std::pow(static_cast<double>(len), dc.len_penalty);
  };

  using Hyp = Hypothesis<T>;
  std::vector<Hyp> beams{Hyp{{}, 0.0, true}};
  std::vector<std::pair<double, std::vector<int>>> finished;

  for (int step = 0; step < max_len && !beams.empty(); ++step) {
    struct Cand {
      double logp;
      int beam;
      int token;
      bool greedy;
    };
    std::vector<Cand> cands;
    Cand greedy_cand{0.0, -1, -1, false};
    for (size_t b = 0; b < beams.size(); ++b) {
      Tape<T> tape;
      tape.recording = false;
      const auto fwd = forward(tape, src, teacher_input(beams[b].tokens), false, nullptr);
      const MatX<T>& z = tape.val(fwd.logits);
      const Eigen::Index last = z.rows() - 1;
      Eigen::Array<double, 1, Eigen::Dynamic> lp =
          z.row(last).template cast<double>().array();
      const double mx = lp.maxCoeff();
      lp -= mx + std::log((lp - mx).exp().sum());
      int argmax = -1;
      for (Eigen::Index i = 0; i < lp.size(); ++i) {
        if (i == Vocab::kPad || i == Vocab::kBos) continue;
        if (argmax < 0 || lp(i) > lp(argmax)) argmax = static_cast<int>(i);
        cands.push_back(
            {beams[b].logp + lp(i), static_cast<int>(b), static_cast<int>(i), false});
      }
      if (beams[b].is_greedy) {
        greedy_cand = {beams[b].logp + lp(argmax), static_cast<int>(b), argmax, true};
      }
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& a, const Cand& b) { return a.logp > b.logp; });

    const bool chain_alive = greedy_cand.beam >= 0;
    auto make_hyp = [&](const Cand& c) {
      Hyp h;
      h.tokens = beams[c.beam].tokens;
      h.tokens.push_back(c.token);
      h.logp = c.logp;
      h.is_greedy = chain_alive && c.beam == greedy_cand.beam && c.token == greedy_cand.token;
      return h;
    };

    // eos candidates within the top window finish; top non-eos continue
    std::vector<Hyp> next;
    bool greedy_handled = false;
    int considered = 0;
    for (const Cand& c : cands) {
      if (considered >= dc.beam || static_cast<int>(next.size()) >= dc.beam) break;
      ++considered;
      const bool is_greedy_cand =
          chain_alive && c.beam == greedy_cand.beam && c.token == greedy_cand.token;
      greedy_handled = greedy_handled || is_greedy_cand;
      if (c.token == Vocab::kEos) {
        finished.emplace_back(norm(c.logp, beams[c.beam].tokens.size() + 1),
                              beams[c.beam].tokens);
        continue;
      }
      next.push_back(make_hyp(c));
    }
    // the greedy chain is never pruned: beam=1 stays exactly greedy and wider
    // beams can only match or beat the greedy hypothesis
    if (chain_alive && !greedy_handled) {
      if (greedy_cand.token == Vocab::kEos) {
        finished.emplace_back(norm(greedy_cand.logp, beams[greedy_cand.beam].tokens.size() + 1),
                              beams[greedy_cand.beam].tokens);
      } else {
        Hyp h = make_hyp(greedy_cand);
        h.is_greedy = true;
        if (static_cast<int>(next.size()) >= dc.beam) next.pop_back();
        next.push_back(std::move(h));
      }
    }
    beams = std::move(next);
  }

  for (const auto& h : beams) finished.emplace_back(norm(h.logp, h.tokens.size() + 1), h.tokens);
  if (finished.empty()) return {};
  const auto best =
      std::max_element(finished.begin(), finished.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
  return best->second;
}

template <class T>
std::vector<MatX<T>> TransformerModel<T>::encoder_activations(const std::vector<int>& src) const {
  Tape<T> tape;
  tape.recording = false;
  std::vector<int> bos{Vocab::kBos};
  const auto fwd = forward(tape, src, bos, false, nullptr, true);
  return fwd.enc_layers;
}

template class ParamStore<float>;
template class ParamStore<double>;
template class TransformerModel<float>;
template class TransformerModel<double>;

}  // namespace ciphernmt
