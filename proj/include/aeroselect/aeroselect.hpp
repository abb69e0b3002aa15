#pragma once

#include "aeroselect/analytics.hpp"
#include "aeroselect/channel.hpp"
#include "aeroselect/config.hpp"
#include "aeroselect/error.hpp"
#include "aeroselect/game_core.hpp"
#include "aeroselect/localization.hpp"
#include "aeroselect/pipeline.hpp"
#include "aeroselect/scripting.hpp"
#include "aeroselect/sensor_wire.hpp"
#include "aeroselect/session_store.hpp"
#include "aeroselect/ui_server.hpp"
