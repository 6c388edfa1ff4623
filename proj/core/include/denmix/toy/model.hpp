#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "denmix/example.hpp"

namespace denmix::toy {

enum class Arch { encoder_decoder, prefix_lm_decoder };

const char* to_string(Arch a);
std::optional<Arch> parse_arch(std::string_view s);  // "encdec" / "prefixdec"

// Everything runs in double precision: the harness exists to make gradient
// and masking checks airtight, not to be fast.
struct ToyConfig {
  std::uint32_t vocab_size = 0;
  std::uint32_t d_model = 64;
  std::uint32_t layers = 2;
  std::uint32_t heads = 2;
  std::uint32_t d_ff = 128;
  std::uint32_t max_len = 512;
  Arch arch = Arch::encoder_decoder;
  std::uint32_t rel_buckets = 32;
  std::uint32_t rel_max_distance = 128;
  TokenId start_id = 0;  // decoder start token (conventionally pad)
};

struct BoolMat {
  std::uint32_t rows = 0, cols = 0;
  std::vector<std::uint8_t> data;

  BoolMat() = default;
  BoolMat(std::uint32_t r, std::uint32_t c, bool fill = false)
      : rows(r), cols(c), data(std::size_t(r) * c, fill ? 1 : 0) {}
  bool at(std::uint32_t r, std::uint32_t c) const {
    return data[std::size_t(r) * cols + c] != 0;
  }
  void set(std::uint32_t r, std::uint32_t c, bool v) {
    data[std::size_t(r) * cols + c] = v ? 1 : 0;
  }
};

// encoder_decoder fills encoder_self / decoder_self / cross;
// prefix_lm_decoder fills joint, where query rows for input positions see
// the input block only and target row t sees inputs plus target slots <= t.
struct AttentionMaskSet {
  BoolMat encoder_self;
  BoolMat decoder_self;
  BoolMat cross;
  BoolMat joint;
};

AttentionMaskSet build_attention_masks(Arch arch, std::uint32_t in_len,
                                       std::uint32_t tgt_len);

struct Mat {
  std::uint32_t rows = 0, cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::uint32_t r, std::uint32_t c) : rows(r), cols(c), data(std::size_t(r) * c, 0.0) {}
  double& at(std::uint32_t r, std::uint32_t c) { return data[std::size_t(r) * cols + c]; }
  double at(std::uint32_t r, std::uint32_t c) const { return data[std::size_t(r) * cols + c]; }
};

// Named view into the flat parameter vector; used by tests for surgery
// (e.g. zeroing the output projection).
struct TensorView {
  std::size_t offset = 0;
  std::uint32_t rows = 0, cols = 0;
  std::size_t size() const { return std::size_t(rows) * cols; }
};

// Pre-norm transformer with RMSNorm, gated SiLU feed-forward, shared
// input embedding, untied output projection, and a bucketed relative
// position bias added to self-attention logits (one table per stack,
// shared across its layers). Cross-attention carries no position bias.
class Model {
 public:
  static Model init(const ToyConfig& cfg, std::uint64_t seed);

  const ToyConfig& config() const { return cfg_; }
  std::size_t num_params() const { return params_.size(); }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& grads() { return grads_; }
  const std::vector<double>& grads() const { return grads_; }

  TensorView tensor(std::string_view name) const;  // throws ValidationError
  std::vector<std::string> tensor_names() const;

 private:
  friend struct ModelOps;
  ToyConfig cfg_;
  std::vector<double> params_;
  std::vector<double> grads_;
  std::map<std::string, TensorView, std::less<>> layout_;
};

// Token-level encoding of an Example for each architecture.
struct PrefixItem {
  TokenSequence tokens;             // inputs ++ [start] ++ targets[:-1]
  std::uint32_t input_len = 0;
  TokenSequence labels;             // aligned with tokens
  std::vector<std::uint8_t> label_mask;  // 1 = position contributes to loss
};
struct EncDecItem {
  TokenSequence enc_tokens;   // example inputs
  TokenSequence dec_tokens;   // [start] ++ targets[:-1]
  TokenSequence labels;       // targets
};

PrefixItem encode_prefix(const Example& ex, const ToyConfig& cfg);
EncDecItem encode_enc_dec(const Example& ex, const ToyConfig& cfg);

struct ForwardResult {
  double loss = 0.0;                     // mean over labeled positions
  std::vector<double> per_example;       // each example's own mean
  std::vector<Mat> logits;               // when requested
};

// Forward only. Logits rows cover decoder positions (encoder_decoder) or
// all positions (prefix_lm_decoder). Throws ValidationError on empty
// targets, out-of-range token ids, or sequences beyond max_len.
ForwardResult forward_loss(const Model& model, std::span<const Example> batch,
                           bool want_logits = false);

// Forward + analytic backward; zeroes and fills model.grads(); returns the
// batch loss (mean over all labeled positions in the batch).
double forward_backward(Model& model, std::span<const Example> batch);

// Full logits for one example (probe tests); same row convention as above.
Mat sequence_logits(const Model& model, const Example& ex);

// Test hook: prefix-architecture loss over an explicit token/label/mask
// triple, so loss masking can be probed independently of Example encoding.
double prefix_sequence_loss(const Model& model, const PrefixItem& item);

// Central-difference gradient check over `samples` randomly chosen
// parameters (all of them when samples >= num_params). Returns the largest
// relative error. epsilon must be positive.
double grad_check(Model& model, std::span<const Example> batch, double epsilon,
                  std::uint32_t samples, std::uint64_t seed);

}  // namespace denmix::toy
