#include "ramstore/error.hpp"

#include <array>
#include <utility>

namespace ramstore {

namespace {

constexpr std::array<std::pair<Errc, std::string_view>, 34> kNames{{
    {Errc::InvalidGeometry, "InvalidGeometry"},
    {Errc::QuotaExceeded, "QuotaExceeded"},
    {Errc::NoSpace, "NoSpace"},
    {Errc::DeviceDestroyed, "DeviceDestroyed"},
    {Errc::OutOfRange, "OutOfRange"},
    {Errc::UnknownDevice, "UnknownDevice"},
    {Errc::AddressInUse, "AddressInUse"},
    {Errc::DuplicateCluster, "DuplicateCluster"},
    {Errc::UnknownCluster, "UnknownCluster"},
    {Errc::AuthFailure, "AuthFailure"},
    {Errc::DuplicateOsd, "DuplicateOsd"},
    {Errc::UnknownOsd, "UnknownOsd"},
    {Errc::NotEnoughOsds, "NotEnoughOsds"},
    {Errc::DuplicatePool, "DuplicatePool"},
    {Errc::UnknownPool, "UnknownPool"},
    {Errc::ManagerUnavailable, "ManagerUnavailable"},
    {Errc::MonitorUnavailable, "MonitorUnavailable"},
    {Errc::InvalidName, "InvalidName"},
    {Errc::NoSuchObject, "NoSuchObject"},
    {Errc::ChecksumMismatch, "ChecksumMismatch"},
    {Errc::PhaseTimeout, "PhaseTimeout"},
    {Errc::AgentFailure, "AgentFailure"},
    {Errc::SharedDirUnwritable, "SharedDirUnwritable"},
    {Errc::AlreadyDeployed, "AlreadyDeployed"},
    {Errc::EmptyPipeline, "EmptyPipeline"},
    {Errc::SingleStage, "SingleStage"},
    {Errc::BackendUnavailable, "BackendUnavailable"},
    {Errc::ZeroBaseline, "ZeroBaseline"},
    {Errc::TooFewSamples, "TooFewSamples"},
    {Errc::MismatchedRows, "MismatchedRows"},
    {Errc::InvalidArgument, "InvalidArgument"},
    {Errc::PayloadTooLarge, "PayloadTooLarge"},
    {Errc::Protocol, "Protocol"},
    {Errc::Internal, "Internal"},
}};

}  // namespace

std::string_view errc_name(Errc code) noexcept {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Internal";
}

Errc errc_from_name(std::string_view name) noexcept {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return Errc::Internal;
}

}  // namespace ramstore
