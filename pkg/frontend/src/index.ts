export * from "./protocol.js";
export * as messages from "./messages.js";
export * from "./viewmodel.js";
export * from "./channel.js";
export * from "./wizard.js";
export * from "./performer.js";
export * from "./render.js";
