#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ramstore {

enum class Errc {
  // devices
  InvalidGeometry,
  QuotaExceeded,
  NoSpace,
  DeviceDestroyed,
  OutOfRange,
  UnknownDevice,
  // control plane
  AddressInUse,
  DuplicateCluster,
  UnknownCluster,
  AuthFailure,
  DuplicateOsd,
  UnknownOsd,
  NotEnoughOsds,
  DuplicatePool,
  UnknownPool,
  ManagerUnavailable,
  MonitorUnavailable,
  // data plane
  InvalidName,
  NoSuchObject,
  ChecksumMismatch,
  // orchestration
  PhaseTimeout,
  AgentFailure,
  SharedDirUnwritable,
  AlreadyDeployed,
  // pipeline / bench
  EmptyPipeline,
  SingleStage,
  BackendUnavailable,
  ZeroBaseline,
  TooFewSamples,
  MismatchedRows,
  // generic
  InvalidArgument,
  PayloadTooLarge,
  Protocol,
  Internal,
};

std::string_view errc_name(Errc code) noexcept;

/// Parses a name produced by errc_name; unknown names map to Errc::Internal.
Errc errc_from_name(std::string_view name) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}
  explicit Error(Errc code) : std::runtime_error(std::string(errc_name(code))), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ramstore
