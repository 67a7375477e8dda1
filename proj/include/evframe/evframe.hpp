#pragma once

#include "evframe/augment.hpp"
#include "evframe/event.hpp"
#include "evframe/frame_io.hpp"
#include "evframe/keypoints.hpp"
#include "evframe/metrics.hpp"
#include "evframe/representation.hpp"
#include "evframe/segmentation.hpp"
#include "evframe/serialization.hpp"
#include "evframe/simulator.hpp"
#include "evframe/stream_io.hpp"
