#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mm2im {

// All library errors derive from mm2im::error so callers can catch once.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid TCONV parameters or tensor extents that disagree with a shape.
class shape_error : public error {
 public:
  using error::error;
};

// Index arguments outside their legal interval.
class range_error : public error {
 public:
  using error::error;
};

// Malformed instruction word stream.
class decode_error : public error {
 public:
  using error::error;
};

// Instruction stream ended before the message payload did.
class underflow_error : public decode_error {
 public:
  using decode_error::decode_error;
};

// Invalid configuration of the accelerator model (capacities, PM counts).
class config_error : public error {
 public:
  using error::error;
};

// Protocol violation observed by the simulator. message_index counts
// messages ingested since the last reset, starting at 0.
class sim_fault : public error {
 public:
  sim_fault(std::size_t message_index, const std::string& what)
      : error("message " + std::to_string(message_index) + ": " + what),
        message_index_(message_index) {}

  std::size_t message_index() const noexcept { return message_index_; }

 private:
  std::size_t message_index_;
};

}  // namespace mm2im
