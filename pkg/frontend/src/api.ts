/**
 * Typed client for the node's C2S admin API (/admin/v1/...).
 *
 * Every method maps 1:1 onto a server endpoint; nothing is cached or
 * invented here, so views always render confirmed server state.  A 401
 * anywhere funnels into onUnauthenticated (the app redirects to login).
 */

export interface IdentityInfo {
  address: string;
  name: string | null;
  registered: boolean;
  url: string;
  delegate: string;
}

export type ContactStatus = "pending_in" | "pending_out" | "accepted" | "declined";

export interface ContactEntry {
  address: string;
  name: string;
  status: ContactStatus;
  request_message?: string | null;
  updated_at: number;
  retry_pending?: boolean;
}

export interface AclRule {
  rule_id: string;
  subject: string;
  api_id: string;
  path_pattern: string;
  action: "read" | "write";
  effect: "allow" | "deny";
  priority: number;
  item_id?: string | null;
}

export interface InterfaceEntry {
  api_id: string;
  name: string;
  version: string;
}

export interface MarketplaceEntry {
  module_id: string;
  org_id: string;
  name: string;
  version: string;
  package_uri: string;
  package_hash: string;
  api_ids: string[];
  installed: boolean;
}

export interface InstalledModule {
  manifest: {
    module_id: string;
    name: string;
    version: string;
    api_ids: string[];
    entrypoint: string;
    min_protocol: string;
  };
  state: "installed" | "running" | "stopped" | "failed";
  install_time: number;
  package_hash: string;
}

export interface CardDoc {
  fields: Record<string, string>;
  revision: number;
  updated_at: number | null;
}

export type FieldAclRow = [subject: string, field: string, effect: "allow" | "deny"];

export interface MirrorEntry extends CardDoc {
  address: string;
}

export interface ProfileDoc {
  address: string;
  name: string | null;
  display_name?: string;
  description?: string;
  avatar_hash?: string;
}

export interface DispatchResult {
  status: number;
  data: unknown;
}

export interface RegistryHit {
  address: string;
  name: string;
  url: string;
  delegate: string;
}

/** Wire error {code, message, ...}; ApiMismatch additionally carries the
 * remote interface list for marketplace matching. */
export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly interfaces?: InterfaceEntry[];

  constructor(status: number, code: string, message: string, interfaces?: InterfaceEntry[]) {
    super(message);
    this.status = status;
    this.code = code;
    this.interfaces = interfaces;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class BladeClient {
  token: string | null = null;
  onUnauthenticated: (() => void) | null = null;

  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const response = await this.fetchImpl(`${this.baseUrl}/admin/v1${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    let payload: unknown = null;
    try {
      payload = await response.json();
    } catch {
      payload = null;
    }
    if (!response.ok) {
      const wire = (payload ?? {}) as {
        code?: string;
        message?: string;
        interfaces?: InterfaceEntry[];
      };
      const code = wire.code ?? `HTTP${response.status}`;
      if (response.status === 401 && code === "Unauthenticated" && this.onUnauthenticated) {
        this.onUnauthenticated();
      }
      throw new ApiError(response.status, code, wire.message ?? "request failed", wire.interfaces);
    }
    return payload as T;
  }

  // -- session ----------------------------------------------------------

  async login(username: string, password: string): Promise<IdentityInfo> {
    const result = await this.request<{ token: string; identity: IdentityInfo }>(
      "POST",
      "/login",
      { username, password },
    );
    this.token = result.token;
    return result.identity;
  }

  logout(): void {
    this.token = null;
  }

  // -- identity ----------------------------------------------------------

  identity(): Promise<IdentityInfo> {
    return this.request("GET", "/identity");
  }

  registerIdentity(name: string): Promise<unknown> {
    return this.request("POST", "/identity/register", { name });
  }

  profile(): Promise<ProfileDoc> {
    return this.request("GET", "/profile");
  }

  updateProfile(fields: Partial<ProfileDoc>): Promise<ProfileDoc> {
    return this.request("PUT", "/profile", fields);
  }

  // -- contacts ----------------------------------------------------------

  contacts(status?: ContactStatus): Promise<ContactEntry[]> {
    const query = status ? `?status=${status}` : "";
    return this.request("GET", `/contacts${query}`);
  }

  requestContact(target: string, message?: string): Promise<ContactEntry> {
    return this.request("POST", "/contacts/request", { target, message });
  }

  respondContact(requester: string, decision: "accept" | "decline"): Promise<ContactEntry> {
    return this.request("POST", "/contacts/respond", { requester, decision });
  }

  registrySearch(prefix: string, limit = 25): Promise<RegistryHit[]> {
    return this.request(
      "GET",
      `/registry/search?prefix=${encodeURIComponent(prefix)}&limit=${limit}`,
    );
  }

  // -- acl ---------------------------------------------------------------

  aclList(): Promise<AclRule[]> {
    return this.request("GET", "/acl");
  }

  aclAdd(rule: Omit<AclRule, "rule_id">): Promise<AclRule> {
    return this.request("POST", "/acl", rule);
  }

  aclUpdate(ruleId: string, changes: Partial<AclRule>): Promise<AclRule> {
    return this.request("PUT", `/acl/${ruleId}`, changes);
  }

  aclDelete(ruleId: string): Promise<unknown> {
    return this.request("DELETE", `/acl/${ruleId}`);
  }

  // -- interfaces / marketplace / modules ---------------------------------

  interfaces(): Promise<InterfaceEntry[]> {
    return this.request("GET", "/interfaces");
  }

  marketplaceSearch(query = "", apiId?: string): Promise<MarketplaceEntry[]> {
    const params = new URLSearchParams({ q: query });
    if (apiId) params.set("api_id", apiId);
    return this.request("GET", `/marketplace/search?${params.toString()}`);
  }

  modules(): Promise<InstalledModule[]> {
    return this.request("GET", "/modules");
  }

  installModule(moduleId: string, source?: string): Promise<InstalledModule> {
    return this.request("POST", "/modules/install", { module_id: moduleId, source });
  }

  moduleLifecycle(moduleId: string, action: "start" | "stop"): Promise<InstalledModule> {
    return this.request("POST", `/modules/${moduleId}`, { action });
  }

  uninstallModule(moduleId: string, purge = false): Promise<unknown> {
    return this.request("DELETE", `/modules/${moduleId}${purge ? "?purge=true" : ""}`);
  }

  /** C2S passthrough into a module's admin surface. */
  moduleCall<T>(apiId: string, method: string, path: string, data?: unknown): Promise<T> {
    return this.request(method, `/modules/${apiId}${path}`, data);
  }

  // -- contact-db module shortcuts ----------------------------------------

  card(apiId: string): Promise<CardDoc> {
    return this.moduleCall(apiId, "GET", "/card");
  }

  updateCard(apiId: string, delta: Record<string, string | null>): Promise<CardDoc> {
    return this.moduleCall(apiId, "PUT", "/card", delta);
  }

  fieldAcl(apiId: string): Promise<FieldAclRow[]> {
    return this.moduleCall(apiId, "GET", "/field-acl");
  }

  setFieldAcl(apiId: string, rows: FieldAclRow[]): Promise<FieldAclRow[]> {
    return this.moduleCall(apiId, "PUT", "/field-acl", rows);
  }

  mirrors(apiId: string): Promise<MirrorEntry[]> {
    return this.moduleCall(apiId, "GET", "/mirrors");
  }

  subscribeTo(apiId: string, target: string): Promise<{ sid: string }> {
    return this.moduleCall(apiId, "POST", "/subscribe", { target });
  }

  // -- outbound test dispatch ---------------------------------------------

  dispatch(
    target: string,
    apiId: string,
    method: string,
    path: string,
    data?: unknown,
  ): Promise<DispatchResult> {
    return this.request("POST", "/dispatch", {
      target,
      api_id: apiId,
      method,
      path,
      data,
    });
  }
}
