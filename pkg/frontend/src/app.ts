/**
 * The admin single-page app: hash-routed views over BladeClient.
 *
 * Rules of the house: render only confirmed server state (refetch after
 * every mutation, no optimistic updates), poll at most every 5 s, and
 * confirm every destructive action.
 */

import {
  ApiError,
  BladeClient,
  type AclRule,
  type ContactEntry,
  type IdentityInfo,
  type InterfaceEntry,
} from "./api.js";
import { createPoller, type Poller } from "./poll.js";
import {
  CARD_FIELDS,
  matrixToRows,
  mergeModules,
  moduleApis,
  reorderPlan,
  rowsToMatrix,
  sectionContacts,
  sortRules,
  type InstallProgress,
} from "./vm.js";

const client = new BladeClient("");
let identity: IdentityInfo | null = null;
let inboxPoller: Poller | null = null;
const installProgress = new Map<string, { progress: InstallProgress; error: string | null }>();

// ---------------------------------------------------------------------------
// tiny DOM helpers
// ---------------------------------------------------------------------------

type Child = Node | string | null | undefined;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | ((event: Event) => void)> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "function") {
      node.addEventListener(key.replace(/^on/, ""), value);
    } else if (key === "class") {
      node.className = value;
    } else {
      node.setAttribute(key, value);
    }
  }
  for (const child of children) {
    if (child === null || child === undefined) continue;
    node.append(child instanceof Node ? child : document.createTextNode(child));
  }
  return node;
}

function mount(...children: Child[]): void {
  const root = document.getElementById("app")!;
  root.replaceChildren();
  for (const child of children) {
    if (child) root.append(child instanceof Node ? child : document.createTextNode(child));
  }
}

function banner(kind: "error" | "ok", text: string): HTMLElement {
  return el("div", { class: `banner ${kind}` }, text);
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `${error.code}: ${error.message}`;
  return String(error);
}

function shortAddr(address: string): string {
  return `${address.slice(0, 10)}…${address.slice(-4)}`;
}

// ---------------------------------------------------------------------------
// session + routing
// ---------------------------------------------------------------------------

client.onUnauthenticated = () => {
  client.logout();
  sessionStorage.removeItem("blade-token");
  identity = null;
  location.hash = "#/login";
};

const ROUTES: Record<string, () => Promise<void> | void> = {
  "#/login": renderLogin,
  "#/dashboard": renderDashboard,
  "#/contacts": renderContacts,
  "#/marketplace": renderMarketplace,
  "#/acl": renderAcl,
  "#/card": renderCard,
  "#/dispatch": renderDispatch,
};

async function route(): Promise<void> {
  inboxPoller?.stop();
  if (!client.token && location.hash !== "#/login") {
    location.hash = "#/login";
    return;
  }
  const view = ROUTES[location.hash] ?? (client.token ? renderDashboard : renderLogin);
  try {
    await view();
  } catch (error) {
    if (!(error instanceof ApiError && error.code === "Unauthenticated")) {
      mount(nav(), banner("error", describe(error)));
    }
  }
}

function nav(): HTMLElement {
  const links: Array<[string, string]> = [
    ["#/dashboard", "Dashboard"],
    ["#/contacts", "Contacts"],
    ["#/marketplace", "Marketplace"],
    ["#/acl", "Access rules"],
    ["#/card", "Contact card"],
    ["#/dispatch", "Dispatch"],
  ];
  return el(
    "nav",
    {},
    ...links.map(([href, label]) =>
      el("a", { href, class: location.hash === href ? "active" : "" }, label),
    ),
    el(
      "a",
      {
        href: "#/login",
        class: "logout",
        onclick: () => {
          client.logout();
          sessionStorage.removeItem("blade-token");
        },
      },
      identity?.name ? `log out (${identity.name})` : "log out",
    ),
  );
}

// ---------------------------------------------------------------------------
// login
// ---------------------------------------------------------------------------

function renderLogin(message?: string): void {
  const username = el("input", { value: "admin", autocomplete: "username" });
  const password = el("input", { type: "password", autocomplete: "current-password" });
  const errorSlot = el("div", {});
  if (message) errorSlot.append(banner("error", message));

  const submit = async (event: Event) => {
    event.preventDefault();
    try {
      identity = await client.login(username.value, password.value);
      sessionStorage.setItem("blade-token", client.token!);
      location.hash = "#/dashboard";
    } catch (error) {
      errorSlot.replaceChildren(banner("error", describe(error)));
    }
  };

  mount(
    el(
      "form",
      { class: "login", onsubmit: submit },
      el("h1", {}, "node admin"),
      errorSlot,
      el("label", {}, "username", username),
      el("label", {}, "password", password),
      el("button", { type: "submit" }, "log in"),
    ),
  );
}

// ---------------------------------------------------------------------------
// dashboard
// ---------------------------------------------------------------------------

async function renderDashboard(): Promise<void> {
  identity = await client.identity();
  const interfaces = await client.interfaces();
  const profile = await client.profile();

  const registerBox = el("div", {});
  if (!identity.registered) {
    const nameInput = el("input", { placeholder: "unique username" });
    registerBox.append(
      el("h2", {}, "Register this node"),
      nameInput,
      el(
        "button",
        {
          onclick: async () => {
            try {
              await client.registerIdentity(nameInput.value);
              await renderDashboard();
            } catch (error) {
              registerBox.prepend(banner("error", describe(error)));
            }
          },
        },
        "register",
      ),
    );
  }

  mount(
    nav(),
    el(
      "section",
      {},
      el("h1", {}, identity.name ? `@${identity.name}` : "unregistered node"),
      el("dl", {},
        el("dt", {}, "address"), el("dd", { class: "mono" }, identity.address),
        el("dt", {}, "delegate"), el("dd", { class: "mono" }, identity.delegate),
        el("dt", {}, "public URL"), el("dd", {}, identity.url),
        el("dt", {}, "registered"), el("dd", {}, identity.registered ? "yes" : "no"),
        el("dt", {}, "display name"), el("dd", {}, profile.display_name ?? "—"),
      ),
      registerBox,
      el("h2", {}, "Served interfaces"),
      interfaceTable(interfaces),
    ),
  );
}

function interfaceTable(interfaces: InterfaceEntry[]): HTMLElement {
  return el(
    "table",
    { class: "interfaces" },
    el("tr", {}, el("th", {}, "api id"), el("th", {}, "name"), el("th", {}, "version")),
    ...interfaces.map((entry) =>
      el(
        "tr",
        {},
        el("td", { class: "mono" }, entry.api_id === "base" ? "base" : shortAddr(entry.api_id)),
        el("td", {}, entry.name),
        el("td", {}, entry.version),
      ),
    ),
  );
}

// ---------------------------------------------------------------------------
// contacts
// ---------------------------------------------------------------------------

async function renderContacts(): Promise<void> {
  const listSlot = el("div", {});
  const errorSlot = el("div", {});

  const refresh = async () => {
    const sections = sectionContacts(await client.contacts());
    listSlot.replaceChildren(
      el("h2", {}, `Inbox (${sections.inbox.length})`),
      ...sections.inbox.map((entry) => inboxRow(entry, refresh)),
      el("h2", {}, "Contacts"),
      ...sections.accepted.map((entry) => contactRow(entry)),
      el("h2", {}, "Outgoing"),
      ...sections.outgoing.map((entry) =>
        contactRow(entry, entry.retry_pending ? "delivery pending, retrying" : "waiting for answer"),
      ),
      ...(sections.declined.length
        ? [el("h2", {}, "Declined"), ...sections.declined.map((entry) => contactRow(entry))]
        : []),
    );
  };

  const target = el("input", { placeholder: "name or 0x… address" });
  const message = el("input", { placeholder: "optional message" });
  const send = async () => {
    errorSlot.replaceChildren();
    try {
      await client.requestContact(target.value, message.value || undefined);
      target.value = "";
      await refresh();
    } catch (error) {
      errorSlot.replaceChildren(banner("error", describe(error)));
    }
  };

  mount(
    nav(),
    el(
      "section",
      {},
      el("h1", {}, "Contacts"),
      errorSlot,
      el("div", { class: "row" }, target, message, el("button", { onclick: send }, "send request")),
      listSlot,
    ),
  );
  await refresh();
  inboxPoller = createPoller(refresh, 5_000);
  inboxPoller.start();
}

function inboxRow(entry: ContactEntry, refresh: () => Promise<void>): HTMLElement {
  const errorSlot = el("span", {});
  const act = (decision: "accept" | "decline") => async () => {
    if (decision === "decline" && !confirm(`Decline the request from ${entry.name}?`)) return;
    try {
      await client.respondContact(entry.address, decision);
      await refresh();
    } catch (error) {
      errorSlot.replaceChildren(banner("error", describe(error)));
    }
  };
  return el(
    "div",
    { class: "card pending" },
    el("strong", {}, entry.name),
    el("span", { class: "mono" }, ` ${shortAddr(entry.address)} `),
    entry.request_message ? el("em", {}, `“${entry.request_message}” `) : null,
    el("button", { onclick: act("accept") }, "accept"),
    el("button", { class: "danger", onclick: act("decline") }, "decline"),
    errorSlot,
  );
}

function contactRow(entry: ContactEntry, note?: string): HTMLElement {
  return el(
    "div",
    { class: "card" },
    el("strong", {}, entry.name),
    el("span", { class: "mono" }, ` ${shortAddr(entry.address)} `),
    el("span", { class: "status" }, note ?? entry.status),
  );
}

// ---------------------------------------------------------------------------
// marketplace
// ---------------------------------------------------------------------------

async function renderMarketplace(): Promise<void> {
  const query = el("input", { placeholder: "search modules" });
  const apiFilter = el("input", { placeholder: "filter by api id (0x…)" });
  const listSlot = el("div", {});
  const errorSlot = el("div", {});

  const refresh = async () => {
    try {
      const [hits, installed] = await Promise.all([
        client.marketplaceSearch(query.value, apiFilter.value || undefined),
        client.modules(),
      ]);
      const vms = mergeModules(hits, installed, installProgress);
      listSlot.replaceChildren(
        ...(vms.length ? [] : [el("p", {}, "nothing matches")]),
        ...vms.map((vm) => {
          const row = el(
            "div",
            { class: "card" },
            el("strong", {}, `${vm.name} ${vm.version}`),
            el("span", { class: "mono" }, ` ${shortAddr(vm.moduleId)} `),
            el("span", { class: "status" }, vm.installed ? `installed: ${vm.state}` : "available"),
          );
          if (vm.error) row.append(banner("error", vm.error));
          if (!vm.installed && vm.progress !== "installing") {
            row.append(
              el(
                "button",
                {
                  onclick: async () => {
                    installProgress.set(vm.moduleId, { progress: "installing", error: null });
                    await refresh();
                    try {
                      await client.installModule(vm.moduleId);
                      installProgress.set(vm.moduleId, { progress: "done", error: null });
                    } catch (error) {
                      installProgress.set(vm.moduleId, {
                        progress: "failed",
                        error: describe(error),
                      });
                    }
                    await refresh();
                  },
                },
                "install",
              ),
            );
          }
          if (vm.progress === "installing") row.append(el("em", {}, " installing…"));
          if (vm.installed && vm.state === "running") {
            row.append(
              el(
                "button",
                {
                  onclick: async () => {
                    await client.moduleLifecycle(vm.moduleId, "stop");
                    await refresh();
                  },
                },
                "stop",
              ),
            );
          }
          if (vm.installed && vm.state === "stopped") {
            row.append(
              el(
                "button",
                {
                  onclick: async () => {
                    await client.moduleLifecycle(vm.moduleId, "start");
                    await refresh();
                  },
                },
                "start",
              ),
            );
          }
          if (vm.installed) {
            row.append(
              el(
                "button",
                {
                  class: "danger",
                  onclick: async () => {
                    if (!confirm(`Uninstall ${vm.name}?`)) return;
                    await client.uninstallModule(vm.moduleId);
                    await refresh();
                  },
                },
                "uninstall",
              ),
            );
          }
          return row;
        }),
      );
    } catch (error) {
      errorSlot.replaceChildren(banner("error", describe(error)));
    }
  };

  mount(
    nav(),
    el(
      "section",
      {},
      el("h1", {}, "Marketplace"),
      errorSlot,
      el("div", { class: "row" }, query, apiFilter, el("button", { onclick: refresh }, "search")),
      listSlot,
    ),
  );
  await refresh();
}

// ---------------------------------------------------------------------------
// acl editor
// ---------------------------------------------------------------------------

async function renderAcl(): Promise<void> {
  const errorSlot = el("div", {});
  const tableSlot = el("div", {});

  const refresh = async () => {
    const rules = sortRules(await client.aclList());
    tableSlot.replaceChildren(
      el(
        "table",
        {},
        el(
          "tr",
          {},
          ...["priority", "subject", "api", "path", "item", "action", "effect", ""].map((h) =>
            el("th", {}, h),
          ),
        ),
        ...rules.map((rule) =>
          el(
            "tr",
            {},
            el("td", {}, String(rule.priority)),
            el("td", { class: "mono" }, rule.subject),
            el("td", { class: "mono" }, rule.api_id),
            el("td", { class: "mono" }, rule.path_pattern),
            el("td", {}, rule.item_id ?? "*"),
            el("td", {}, rule.action),
            el("td", { class: rule.effect }, rule.effect),
            el(
              "td",
              {},
              el("button", { onclick: () => move(rule, "up") }, "▲"),
              el("button", { onclick: () => move(rule, "down") }, "▼"),
              el(
                "button",
                {
                  class: "danger",
                  onclick: async () => {
                    if (!confirm(`Delete rule ${rule.rule_id}?`)) return;
                    await client.aclDelete(rule.rule_id);
                    await refresh();
                  },
                },
                "delete",
              ),
            ),
          ),
        ),
      ),
    );

    async function move(rule: AclRule, direction: "up" | "down") {
      for (const change of reorderPlan(rules, rule.rule_id, direction)) {
        await client.aclUpdate(change.ruleId, { priority: change.priority });
      }
      await refresh();
    }
  };

  const subject = el("input", { value: "contacts" });
  const apiId = el("input", { value: "base" });
  const pattern = el("input", { value: "/profile" });
  const action = el("select", {}, el("option", {}, "read"), el("option", {}, "write"));
  const effect = el("select", {}, el("option", {}, "allow"), el("option", {}, "deny"));
  const priority = el("input", { type: "number", value: "100" });

  mount(
    nav(),
    el(
      "section",
      {},
      el("h1", {}, "Access rules"),
      el("p", {}, "First match by ascending priority wins; everything else is denied."),
      errorSlot,
      el(
        "div",
        { class: "row" },
        subject, apiId, pattern, action, effect, priority,
        el(
          "button",
          {
            onclick: async () => {
              errorSlot.replaceChildren();
              try {
                await client.aclAdd({
                  subject: subject.value,
                  api_id: apiId.value,
                  path_pattern: pattern.value,
                  action: action.value as "read" | "write",
                  effect: effect.value as "allow" | "deny",
                  priority: Number(priority.value),
                });
                await refresh();
              } catch (error) {
                errorSlot.replaceChildren(banner("error", describe(error)));
              }
            },
          },
          "add rule",
        ),
      ),
      tableSlot,
    ),
  );
  await refresh();
}

// ---------------------------------------------------------------------------
// card editor (contact-db module passthrough)
// ---------------------------------------------------------------------------

async function renderCard(): Promise<void> {
  const interfaces = moduleApis(await client.interfaces());
  if (interfaces.length === 0) {
    mount(
      nav(),
      el("section", {}, el("h1", {}, "Contact card"),
        el("p", {}, "No module is running; install the contact module from the marketplace.")),
    );
    return;
  }
  const apiId = interfaces[0].api_id;
  const errorSlot = el("div", {});
  const editorSlot = el("div", {});

  const refresh = async () => {
    const [card, rows, contacts] = await Promise.all([
      client.card(apiId),
      client.fieldAcl(apiId),
      client.contacts("accepted"),
    ]);
    const subjects = [
      "contacts",
      "*",
      ...contacts.map((entry) => entry.address),
    ];
    const matrix = rowsToMatrix(rows, subjects);

    const fieldInputs = new Map(
      CARD_FIELDS.map((field) => [
        field,
        el("input", { value: card.fields[field] ?? "" }),
      ] as const),
    );
    const checkboxes = new Map<string, HTMLInputElement>();

    editorSlot.replaceChildren(
      el("h2", {}, `Fields (revision ${card.revision})`),
      ...CARD_FIELDS.map((field) =>
        el("label", { class: "field" }, field, fieldInputs.get(field)!),
      ),
      el(
        "button",
        {
          onclick: async () => {
            errorSlot.replaceChildren();
            const delta: Record<string, string | null> = {};
            for (const [field, input] of fieldInputs) {
              const existing = card.fields[field] ?? "";
              if (input.value !== existing) delta[field] = input.value || null;
            }
            try {
              await client.updateCard(apiId, delta);
              await refresh(); // saving fans out pushes to subscribers
            } catch (error) {
              errorSlot.replaceChildren(banner("error", describe(error)));
            }
          },
        },
        "save card (pushes to subscribers)",
      ),
      el("h2", {}, "Who sees which field"),
      el(
        "table",
        {},
        el("tr", {}, el("th", {}, "subject"), ...CARD_FIELDS.map((f) => el("th", {}, f))),
        ...matrix.subjects.map((subject) =>
          el(
            "tr",
            {},
            el("td", { class: "mono" }, subject),
            ...CARD_FIELDS.map((field) => {
              const box = el("input", { type: "checkbox" });
              box.checked = matrix.allowed.get(subject)?.has(field) ?? false;
              checkboxes.set(`${subject}:${field}`, box);
              return el("td", {}, box);
            }),
          ),
        ),
      ),
      el(
        "button",
        {
          onclick: async () => {
            errorSlot.replaceChildren();
            const allowed = new Map(
              matrix.subjects.map((subject) => [
                subject,
                new Set(
                  CARD_FIELDS.filter(
                    (field) => checkboxes.get(`${subject}:${field}`)?.checked,
                  ),
                ),
              ]),
            );
            try {
              await client.setFieldAcl(apiId, matrixToRows({ subjects: matrix.subjects, allowed }));
              await refresh();
            } catch (error) {
              errorSlot.replaceChildren(banner("error", describe(error)));
            }
          },
        },
        "save disclosure matrix",
      ),
    );
  };

  mount(
    nav(),
    el("section", {}, el("h1", {}, "Contact card"), errorSlot, editorSlot),
  );
  await refresh();
}

// ---------------------------------------------------------------------------
// dispatch panel
// ---------------------------------------------------------------------------

async function renderDispatch(): Promise<void> {
  const interfaces = await client.interfaces();
  const target = el("input", { placeholder: "name or 0x… address" });
  const apiSelect = el(
    "select",
    {},
    ...interfaces.map((entry) =>
      el("option", { value: entry.api_id }, `${entry.name} (${entry.api_id === "base" ? "base" : shortAddr(entry.api_id)})`),
    ),
  );
  const method = el(
    "select",
    {},
    ...["GET", "POST", "PUT", "DELETE"].map((m) => el("option", {}, m)),
  );
  const path = el("input", { value: "/interfaces" });
  const payload = el("textarea", { placeholder: "JSON payload (optional)" });
  const resultSlot = el("div", {});

  const send = async () => {
    resultSlot.replaceChildren(el("em", {}, "sending…"));
    let data: unknown;
    try {
      data = payload.value ? JSON.parse(payload.value) : undefined;
    } catch (error) {
      resultSlot.replaceChildren(banner("error", `payload is not JSON: ${error}`));
      return;
    }
    try {
      const result = await client.dispatch(
        target.value, apiSelect.value, method.value, path.value, data,
      );
      resultSlot.replaceChildren(
        banner("ok", `verified response, status ${result.status}`),
        el("pre", {}, JSON.stringify(result.data, null, 2)),
      );
    } catch (error) {
      const pieces: Child[] = [banner("error", describe(error))];
      if (error instanceof ApiError && error.interfaces?.length) {
        pieces.push(
          el("p", {}, "the peer serves these apis instead:"),
          interfaceTable(error.interfaces),
        );
      }
      resultSlot.replaceChildren(...pieces.filter((p): p is Node => p instanceof Node));
    }
  };

  mount(
    nav(),
    el(
      "section",
      {},
      el("h1", {}, "Dispatch"),
      el("p", {}, "Send a signed test message to a peer and inspect the verified response."),
      el("div", { class: "row" }, target, apiSelect, method, path),
      payload,
      el("button", { onclick: send }, "send"),
      resultSlot,
    ),
  );
}

// ---------------------------------------------------------------------------
// boot
// ---------------------------------------------------------------------------

export function boot(): void {
  const saved = sessionStorage.getItem("blade-token");
  if (saved) client.token = saved;
  window.addEventListener("hashchange", () => void route());
  if (!location.hash) location.hash = client.token ? "#/dashboard" : "#/login";
  void route();
}

boot();
