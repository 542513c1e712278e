// Copyright 2026 The mi6sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Deterministic discrete-time substrate: clock, registered FIFOs, seeded
// mixing, and the optional event log.

#ifndef MI6_ENGINE_HPP_
#define MI6_ENGINE_HPP_

#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mi6 {

// Raised when the model detects an impossible state. Carries the cycle and
// the component that noticed it.
class SimError : public std::runtime_error {
 public:
  SimError(uint64_t cycle, std::string component, const std::string& what)
      : std::runtime_error("cycle " + std::to_string(cycle) + " [" +
                           component + "]: " + what),
        cycle_(cycle),
        component_(std::move(component)) {}

  uint64_t cycle() const { return cycle_; }
  const std::string& component() const { return component_; }

 private:
  uint64_t cycle_;
  std::string component_;
};

class Clock {
 public:
  uint64_t now() const { return cycle_; }
  void tick() { ++cycle_; }

 private:
  uint64_t cycle_ = 0;
};

// SplitMix64 finalizer.
constexpr uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// Stateless keyed hash of two words. Used for replacement choices so that
// a structure carries no replacement state of its own.
constexpr uint64_t hash_words(uint64_t seed, uint64_t a, uint64_t b) {
  return mix64(seed ^ mix64(a + kGolden) ^ mix64(mix64(b) + 2 * kGolden));
}

// FNV-1a over the label, then mixed with the parent seed.
constexpr uint64_t derive_seed(uint64_t seed, std::string_view label) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(seed ^ mix64(h));
}

// SplitMix64 stream: state += golden; out = mix64(state).
class DetRng {
 public:
  explicit DetRng(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    state_ += kGolden;
    return mix64(state_);
  }
  // Uniform in [0, n) by rejection; n must be positive.
  uint64_t below(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }
  bool chance(uint64_t num, uint64_t den) { return below(den) < num; }
  // Independent child stream; does not advance this generator.
  DetRng split(std::string_view label) const {
    return DetRng(derive_seed(state_, label));
  }
  uint64_t state() const { return state_; }

 private:
  uint64_t state_;
};

// Bounded FIFO with registered visibility: an item enqueued in cycle t can
// be dequeued from cycle t+1 on, after commit(). Dequeuing before enqueuing
// within a cycle frees space (drain-then-fill).
template <typename T>
class Fifo {
 public:
  Fifo() = default;
  Fifo(std::string name, size_t capacity)
      : name_(std::move(name)), capacity_(capacity) {}

  const std::string& name() const { return name_; }
  size_t capacity() const { return capacity_; }

  bool can_enqueue() const {
    return visible_.size() + pending_.size() < capacity_;
  }
  void enqueue(T item) {
    if (!can_enqueue()) {
      throw std::logic_error("fifo '" + name_ + "' enqueue over capacity");
    }
    pending_.push_back(std::move(item));
  }

  bool empty() const { return visible_.empty(); }
  size_t visible_size() const { return visible_.size(); }
  size_t occupancy() const { return visible_.size() + pending_.size(); }

  const T& front() const {
    if (visible_.empty()) {
      throw std::logic_error("fifo '" + name_ + "' front of empty queue");
    }
    return visible_.front();
  }
  T& front() {
    if (visible_.empty()) {
      throw std::logic_error("fifo '" + name_ + "' front of empty queue");
    }
    return visible_.front();
  }
  T dequeue() {
    if (visible_.empty()) {
      throw std::logic_error("fifo '" + name_ + "' dequeue of empty queue");
    }
    T item = std::move(visible_.front());
    visible_.pop_front();
    return item;
  }
  const std::deque<T>& visible() const { return visible_; }

  // Visits every entry, committed or not, oldest first.
  template <typename F>
  void for_each(F&& f) {
    for (auto& item : visible_) f(item);
    for (auto& item : pending_) f(item);
  }
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& item : visible_) f(item);
    for (const auto& item : pending_) f(item);
  }

  void commit() {
    for (auto& item : pending_) visible_.push_back(std::move(item));
    pending_.clear();
  }
  void clear() {
    visible_.clear();
    pending_.clear();
  }

 private:
  std::string name_;
  size_t capacity_ = 1;
  std::deque<T> visible_;
  std::vector<T> pending_;
};

// Rows of "cycle,component,event,detail". Disabled logs cost one branch.
class EventLog {
 public:
  explicit EventLog(bool enabled = false) : enabled_(enabled) {}

  bool enabled() const { return enabled_; }
  void set_enabled(bool on) { enabled_ = on; }

  void add(uint64_t cycle, std::string_view component, std::string_view event,
           std::string_view detail) {
    if (!enabled_) return;
    text_ += std::to_string(cycle);
    text_ += ',';
    text_ += component;
    text_ += ',';
    text_ += event;
    text_ += ',';
    text_ += detail;
    text_ += '\n';
  }
  const std::string& text() const { return text_; }
  void clear() { text_.clear(); }

 private:
  bool enabled_;
  std::string text_;
};

}  // namespace mi6

#endif  // MI6_ENGINE_HPP_
