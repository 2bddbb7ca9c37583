#pragma once

#include "etcons/agent.hpp"
#include "etcons/certificates.hpp"
#include "etcons/demo.hpp"
#include "etcons/engine.hpp"
#include "etcons/errors.hpp"
#include "etcons/expm.hpp"
#include "etcons/graph.hpp"
#include "etcons/io.hpp"
#include "etcons/network.hpp"
#include "etcons/params.hpp"
#include "etcons/scenario.hpp"
