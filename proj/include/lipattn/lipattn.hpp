#pragma once

#include "lipattn/core.hpp"
#include "lipattn/measures.hpp"
#include "lipattn/potentials.hpp"
#include "lipattn/kernels.hpp"
#include "lipattn/transport.hpp"
#include "lipattn/bounds.hpp"
#include "lipattn/probes.hpp"
#include "lipattn/dynamics.hpp"
