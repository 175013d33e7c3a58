#pragma once

namespace mgvc {

// Network sizes. Defaults are the full-scale sizes; tests and desk-scale
// runs shrink them.
struct ModelDims {
  int d_vis = 2048;           // frame feature size
  int d_emb = 300;            // word / object embedding size
  int hidden = 1000;          // encoder, attention and decoder state size
  int vocab = 25231;          // V
  int meaning_hidden = 1000;  // per-direction GRU state of the sentence encoder
  int sentence_dim = 1000;    // sentence embedding size

  bool operator==(const ModelDims&) const = default;
};

}  // namespace mgvc
