#pragma once

#include <stdexcept>
#include <string>

namespace etcons {

// Base for every error raised by the library. Callers that only care about
// "something in etcons failed" can catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidGraph : public Error {
 public:
  using Error::Error;
};

class NotARoot : public Error {
 public:
  using Error::Error;
};

class NotHurwitz : public Error {
 public:
  using Error::Error;
};

class InvalidSpectralGap : public Error {
 public:
  using Error::Error;
};

class DegenerateBound : public Error {
 public:
  using Error::Error;
};

// A modelling hypothesis (spanning tree, λ < λ̂, undirected graph, ...) does
// not hold for the scenario at hand.
class AssumptionViolated : public Error {
 public:
  using Error::Error;
};

class ProtocolViolation : public Error {
 public:
  using Error::Error;
};

class ClockViolation : public Error {
 public:
  using Error::Error;
};

// Raised by the engine in strict mode when a runtime invariant breaks.
class InvariantBreach : public Error {
 public:
  using Error::Error;
};

class ScenarioError : public Error {
 public:
  using Error::Error;
};

}  // namespace etcons
