#pragma once

#include "rephoto/degrade.hpp"
#include "rephoto/error.hpp"
#include "rephoto/errorproj.hpp"
#include "rephoto/geometry.hpp"
#include "rephoto/harness.hpp"
#include "rephoto/image.hpp"
#include "rephoto/image_io.hpp"
#include "rephoto/mesh_io.hpp"
#include "rephoto/metrics.hpp"
#include "rephoto/procedural.hpp"
#include "rephoto/rasterizer.hpp"
#include "rephoto/scene.hpp"
#include "rephoto/stats.hpp"
