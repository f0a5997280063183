#pragma once

#include "chameleon/error.hpp"
#include "chameleon/scene.hpp"
#include "chameleon/scene_io.hpp"
#include "chameleon/geometry.hpp"
#include "chameleon/image.hpp"
#include "chameleon/render.hpp"
#include "chameleon/registry.hpp"
#include "chameleon/dsl.hpp"
#include "chameleon/chat.hpp"
#include "chameleon/vqa.hpp"
#include "chameleon/fast_system.hpp"
#include "chameleon/slow_system.hpp"
#include "chameleon/synth.hpp"
#include "chameleon/mock.hpp"
#include "chameleon/pipeline.hpp"
#include "chameleon/eval.hpp"
