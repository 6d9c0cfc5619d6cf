/**
 * Thin typed client over the registry's HTTP/JSON surface with bearer-token
 * authentication and a single silent refresh-retry on 401.
 */

export interface RoleAssignment {
  role: string;
  studyId: string;
}

export interface LoginResponse {
  token: string;
  expiresIn: number;
  subject: string;
  assignments: RoleAssignment[];
}

export interface EntityEnvelope {
  id: string;
  kind: string;
  studyId: string;
  version: number;
  data: Record<string, unknown>;
}

export interface Page<T> {
  items: T[];
  total: number;
  page: number;
  pageSize: number;
}

export interface PassportDocument {
  passportId: string;
  compiledAt: string;
  compiledBy: string;
  deploymentId: string;
  sections: Array<{ kind: string; content: Record<string, unknown> }>;
  sourceVersions: Record<string, number>;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public details?: unknown,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiClient {
  private token = "";
  private username = "";
  private password = "";

  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async login(username: string, password: string): Promise<LoginResponse> {
    const r = await this.fetchImpl(`${this.baseUrl}/auth/login`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ username, password }),
    });
    const body = await r.json();
    if (!r.ok) {
      throw new ApiError(r.status, body.code ?? "error", body.message ?? "");
    }
    this.token = body.token;
    this.username = username;
    this.password = password;
    return body as LoginResponse;
  }

  get authenticated(): boolean {
    return this.token !== "";
  }

  /**
   * Authenticated request; on 401 the client re-logs-in with the stored
   * credentials and retries exactly once.
   */
  async request(
    method: string,
    path: string,
    body?: unknown,
    headers?: Record<string, string>,
    retried = false,
  ): Promise<Response> {
    const r = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: {
        Authorization: `Bearer ${this.token}`,
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
        ...headers,
      },
      ...(body !== undefined ? { body: JSON.stringify(body) } : {}),
    });
    if (r.status === 401 && !retried && this.username !== "") {
      await this.login(this.username, this.password);
      return this.request(method, path, body, headers, true);
    }
    return r;
  }

  private async json<T>(
    method: string,
    path: string,
    body?: unknown,
    headers?: Record<string, string>,
  ): Promise<T> {
    const r = await this.request(method, path, body, headers);
    const parsed = r.status === 204 ? undefined : await r.json();
    if (!r.ok) {
      throw new ApiError(
        r.status,
        parsed?.code ?? "error",
        parsed?.message ?? "",
        parsed?.details,
      );
    }
    return parsed as T;
  }

  listStudies(page = 1, pageSize = 20, search = ""): Promise<Page<EntityEnvelope>> {
    const q = new URLSearchParams({
      page: String(page),
      pageSize: String(pageSize),
      search,
    });
    return this.json("GET", `/studies?${q}`);
  }

  listInStudy(
    studyId: string,
    kindPath: string,
    page = 1,
    pageSize = 20,
    search = "",
  ): Promise<Page<EntityEnvelope>> {
    const q = new URLSearchParams({
      page: String(page),
      pageSize: String(pageSize),
      search,
    });
    return this.json("GET", `/studies/${studyId}/${kindPath}?${q}`);
  }

  getEntity(kindPath: string, id: string): Promise<EntityEnvelope> {
    return this.json("GET", `/${kindPath}/${id}`);
  }

  createInStudy(
    studyId: string,
    kindPath: string,
    body: Record<string, unknown>,
  ): Promise<EntityEnvelope> {
    return this.json("POST", `/studies/${studyId}/${kindPath}`, body);
  }

  updateEntity(
    kindPath: string,
    id: string,
    version: number,
    body: Record<string, unknown>,
  ): Promise<EntityEnvelope> {
    return this.json("PUT", `/${kindPath}/${id}`, body, {
      "If-Match": String(version),
    });
  }

  deleteEntity(kindPath: string, id: string): Promise<void> {
    return this.json("DELETE", `/${kindPath}/${id}`);
  }

  compilePassport(
    deploymentId: string,
    sections?: string[],
  ): Promise<EntityEnvelope> {
    return this.json(
      "POST",
      `/deployments/${deploymentId}/passports`,
      sections ? { sections } : {},
    );
  }

  recompilePassport(
    passportId: string,
    version: number,
    sections?: string[],
  ): Promise<EntityEnvelope> {
    return this.json("PUT", `/passports/${passportId}`, sections ? { sections } : {}, {
      "If-Match": String(version),
    });
  }

  /** Canonical document bytes exactly as served (signature payload). */
  async getPassportBytes(passportId: string): Promise<string> {
    const r = await this.request("GET", `/passports/${passportId}`);
    if (!r.ok) {
      const body = await r.json();
      throw new ApiError(r.status, body.code ?? "error", body.message ?? "");
    }
    return r.text();
  }

  getSignature(passportId: string): Promise<Record<string, string>> {
    return this.json("GET", `/passports/${passportId}/signature`);
  }

  async getReport(passportId: string): Promise<string> {
    const r = await this.request("GET", `/passports/${passportId}/report`);
    if (!r.ok) {
      const body = await r.json();
      throw new ApiError(r.status, body.code ?? "error", body.message ?? "");
    }
    return r.text();
  }
}
