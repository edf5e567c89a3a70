#pragma once

#include <stdexcept>
#include <string>

namespace adfi {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidBodyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LookupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct QueryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RestoreError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SimulationDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RegistrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LevelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LayoutError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ActionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParameterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SignalerProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PlanningError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace adfi
