#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mmodsim/acquisition.hpp"
#include "mmodsim/analysis.hpp"
#include "mmodsim/geometry.hpp"

namespace mmodsim {

uint32_t crc32(const uint8_t* data, std::size_t len, uint32_t seed = 0);

enum class CdssState : uint8_t {
  Initialization = 0,
  Monitoring,
  Communication,
  ImpactDetection,
  PeriodicMeasurement,
};

enum class CdssEvent : uint8_t {
  HostCommand = 0,
  ImpactTrigger,
  PeriodicTimer,
  WatchdogTimeout,
  InitDone,
};

enum class CdssAction : uint8_t {
  ClearBuffers = 0,
  Calibrate,
  VerifySupplies,
  EstablishLink,
  CaptureAcoustic,
  ActuatePiezo,
  MeasureGrid,
  CheckSupplies,
  MeasureTemperatures,
  RecordHealth,
};

const char* to_string(CdssState s);
const char* to_string(CdssEvent e);
const char* to_string(CdssAction a);

struct StepResult {
  bool accepted = false;
  CdssState next = CdssState::Initialization;
  std::vector<CdssAction> actions;
};

/// Pure transition table. Undefined (state, event) pairs come back with
/// accepted = false; nothing throws.
StepResult step(CdssState state, CdssEvent event);

enum class RecordKind : uint8_t { Impact = 0, Periodic, Calibration, Health };

struct EventRecord {
  RecordKind kind = RecordKind::Health;
  double timestamp = 0.0;  // s, synchronized clock
  std::vector<DigitizedRecord> acoustic;  // 8 channels when present
  std::optional<GridMeasurement> grid;
  std::array<double, 8> temps{};
  uint8_t supply_status = 0;  // bit set = rail fault

  std::vector<uint8_t> serialize() const;
  static EventRecord deserialize(const std::vector<uint8_t>& bytes);
};

enum class ReadStatus : uint8_t { Clean = 0, Corrected, Unrecoverable };

struct ReadResult {
  ReadStatus status = ReadStatus::Clean;
  std::vector<uint8_t> payload;
  std::array<bool, 3> replica_flagged{};
  std::array<std::vector<uint8_t>, 3> raw_replicas;  // attached when unrecoverable
};

/// SRAM event store with three replicas per record and a CRC-32 per
/// replica (reflected polynomial 0xEDB88320). Reads vote per byte across
/// the replicas and then verify the voted payload against the voted CRC.
/// When full, the oldest record is evicted ring-buffer style.
class ProtectedStore {
 public:
  explicit ProtectedStore(std::size_t capacity_bytes = 4ull << 20)
      : capacity_(capacity_bytes) {}

  /// Returns the monotonically increasing logical index of the record.
  uint64_t store(const std::vector<uint8_t>& payload);
  uint64_t store_record(const EventRecord& rec) { return store(rec.serialize()); }

  ReadResult read(uint64_t index) const;
  EventRecord read_record(uint64_t index) const;

  /// Toggle one bit inside one replica blob (payload bytes followed by the
  /// 4 CRC bytes). Applying the same fault twice restores the original.
  void inject_fault(uint64_t index, int replica, std::size_t byte_offset, int bit);

  std::size_t record_count() const { return records_.size(); }
  uint64_t next_index() const { return next_index_; }
  uint64_t oldest_index() const { return next_index_ - records_.size(); }
  std::size_t bytes_used() const { return bytes_used_; }
  std::size_t capacity() const { return capacity_; }
  uint64_t evictions() const { return evictions_; }

  void dump(std::ostream& os) const;
  static ProtectedStore restore(std::istream& is);

 private:
  struct Slot {
    std::array<std::vector<uint8_t>, 3> replicas;  // payload || crc32 (LE)
  };
  static std::size_t slot_bytes(const Slot& s);

  std::size_t capacity_;
  std::size_t bytes_used_ = 0;
  uint64_t next_index_ = 0;
  uint64_t evictions_ = 0;
  std::vector<Slot> records_;  // records_[i] has logical index oldest_index() + i
};

/// Once-per-second host sync: the local oscillator drifts at drift_rate
/// between syncs and the accumulated error is zeroed on each whole second.
class SyncedClock {
 public:
  explicit SyncedClock(double drift_rate = 10e-6) : drift_rate_(drift_rate) {}
  double now(double true_time_s) const {
    const double since_sync = true_time_s - std::floor(true_time_s);
    return true_time_s + drift_rate_ * since_sync;
  }

 private:
  double drift_rate_;
};

struct CalibrationResult {
  bool ok = false;
  double wave_speed = 0.0;  // m/s
  int iterations = 0;
  int usable_sensors = 0;
};

/// Recover the film wave speed from one piezo burst: scalar golden-section
/// search over speed, minimizing the distance between the multilaterated
/// pulse origin and the known piezo position. Fails when fewer than three
/// sensors show a detectable pulse.
CalibrationResult calibrate_wave_speed(const std::array<DigitizedRecord, 4>& piezo_records,
                                       const SensorGeometry& geom, int layer,
                                       double initial_speed, double lsb,
                                       const ArrivalParams& params = {},
                                       int max_iterations = 50);

/// The control/storage actor: owns the state machine, the synchronized
/// clock, the protected store, and a line-oriented event log. Events are
/// processed strictly in order. Measurement states run their actions and
/// drop back to Monitoring via complete(); Initialization waits for
/// InitDone.
class Cdss {
 public:
  explicit Cdss(std::size_t store_capacity = 4ull << 20, double drift_rate = 10e-6)
      : store_(store_capacity), clock_(drift_rate) {}

  CdssState state() const { return state_; }
  ProtectedStore& store() { return store_; }
  const ProtectedStore& store() const { return store_; }
  const std::vector<std::string>& log() const { return log_; }
  double clock_now() const { return clock_.now(sim_time_); }

  void advance_time(double true_time_s) { sim_time_ = std::max(sim_time_, true_time_s); }

  /// Runs the transition table; logs the transition (or the rejection).
  StepResult dispatch(CdssEvent event);

  /// Finish the current measurement/communication state and return to
  /// Monitoring. No-op in Initialization and Monitoring.
  void complete();

  uint64_t store_event(const EventRecord& rec);

 private:
  void logline(const std::string& s);

  CdssState state_ = CdssState::Initialization;
  double sim_time_ = 0.0;
  ProtectedStore store_;
  SyncedClock clock_;
  std::vector<std::string> log_;
};

}  // namespace mmodsim
