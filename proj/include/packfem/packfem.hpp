#pragma once

#include "packfem/types.hpp"
#include "packfem/shape.hpp"
#include "packfem/quadrature.hpp"
#include "packfem/mesh.hpp"
#include "packfem/mesh_io.hpp"
#include "packfem/packing.hpp"
#include "packfem/sparse.hpp"
#include "packfem/assembly.hpp"
#include "packfem/solver.hpp"
#include "packfem/counters.hpp"
#include "packfem/timeloop.hpp"
#include "packfem/bench.hpp"
