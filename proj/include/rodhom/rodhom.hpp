#pragma once

#include "rodhom/error.hpp"
#include "rodhom/cross_section.hpp"
#include "rodhom/fem2d.hpp"
#include "rodhom/so3.hpp"
#include "rodhom/material.hpp"
#include "rodhom/material_config.hpp"
#include "rodhom/effective_stiffness.hpp"
#include "rodhom/finite_h.hpp"
#include "rodhom/rod_model.hpp"
#include "rodhom/probe3d.hpp"
#include "rodhom/report.hpp"
