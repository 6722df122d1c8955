#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ipal/lab/generator.hpp"
#include "ipal/lab/rng.hpp"
#include "ipal/message.hpp"

namespace ipal::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "ipal");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

Timestamp at(double seconds);

/// Random valid message with id `id`; answers link to an earlier id.
IpalMessage random_message(lab::Rng& rng, std::uint64_t id, Timestamp t);
std::vector<IpalMessage> random_stream(lab::Rng& rng, std::size_t n, bool with_values = true);

/// Bare message for detector fixtures.
IpalMessage msg(std::uint64_t id, double t, std::int64_t type = 3, Activity act = Activity::request,
                const std::string& src = "10.0.0.10:49152:1", const std::string& dst = "10.0.0.1:502:1");

StateMessage state(double t, ProcessData data, Label label = Label::benign);

/// One polled real variable per cycle on one connection, constant value.
lab::ScenarioSpec periodic_spec(double duration, double period, double jitter, std::uint64_t seed);

/// The scenario shipped under tests/data.
lab::ScenarioSpec shipped_spec();
std::filesystem::path data_dir();

std::size_t count_malicious(const std::vector<IpalMessage>& msgs);

}  // namespace ipal::test
