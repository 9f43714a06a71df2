#ifndef WALKLINE_WALKLINE_HPP
#define WALKLINE_WALKLINE_HPP

#include "walkline/acceptance.hpp"
#include "walkline/banded.hpp"
#include "walkline/bridge_engine.hpp"
#include "walkline/core_model.hpp"
#include "walkline/errors.hpp"
#include "walkline/io.hpp"
#include "walkline/phase_lab.hpp"
#include "walkline/rw_to_sos.hpp"
#include "walkline/sos_to_rw.hpp"

#endif  // WALKLINE_WALKLINE_HPP
