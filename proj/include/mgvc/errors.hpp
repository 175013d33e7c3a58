#pragma once

#include <stdexcept>
#include <string>

namespace mgvc {

// Malformed on-disk input: feature packs, manifests, checkpoints, vectors.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or precondition on user-supplied settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor dimension mismatch inside the network.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Token id outside the vocabulary.
class VocabularyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad call-site input (empty sequences, empty corpora, ...).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mgvc
